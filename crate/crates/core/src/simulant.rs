//! Simulated participant: a logistic detection model whose threshold drops
//! for categories with planted goal strength, used to exercise the whole
//! schedule → report pipeline without a human in the loop.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{category_stats_with, AnalysisError, AnalysisOptions, SessionTranscript};
use crate::config::SessionConfig;
use crate::lexicon::{GoalCategory, StimulusSet};
use crate::scheduler::{build_schedule, ScheduleError, TrialPlan, TrialSpec};
use crate::scoring::{classify, Confidence, Kind, ScoringError, TrialResponse};

/// Chance that an undetected word produces no report at all.
pub const NO_REPORT_PROB: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum SimulantError {
    #[error("invalid simulant parameters: {0}")]
    Params(String),
    #[error("n_sessions must be positive")]
    NoSessions,
    #[error("planted category {planted} is not the strongest (boost of {other} is larger)")]
    PlantedNotStrongest {
        planted: GoalCategory,
        other: GoalCategory,
    },
    #[error("plan word '{0}' is not in the stimulus set")]
    UnknownWord(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulantParams {
    /// Duration (ms) at which a neutral, average word is seen half the time.
    pub theta_ms: f64,
    /// Logistic slope per ms.
    pub slope: f64,
    /// Threshold reduction in ms per category; missing categories get 0.
    pub boost: BTreeMap<GoalCategory, f64>,
    /// ms added to the threshold per character above the set mean length.
    pub len_coef: f64,
    /// ms removed from the threshold per log10 frequency unit above the set mean.
    pub freq_coef: f64,
    pub guess_floor: f64,
    pub partial_prob: f64,
    pub seed: u64,
}

impl Default for SimulantParams {
    fn default() -> Self {
        SimulantParams {
            theta_ms: 55.0,
            slope: 0.3,
            boost: BTreeMap::new(),
            len_coef: 1.0,
            freq_coef: 2.0,
            guess_floor: 0.001,
            partial_prob: 0.1,
            seed: 0,
        }
    }
}

impl SimulantParams {
    pub fn boost_of(&self, c: GoalCategory) -> f64 {
        self.boost.get(&c).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), SimulantError> {
        let fail = |m: &str| Err(SimulantError::Params(m.to_string()));
        if !(self.slope > 0.0 && self.slope.is_finite()) {
            return fail("slope must be positive");
        }
        if !(0.0..=0.05).contains(&self.guess_floor) {
            return fail("guess_floor must lie in [0, 0.05]");
        }
        if !(0.0..=1.0).contains(&self.partial_prob) {
            return fail("partial_prob must lie in [0, 1]");
        }
        if self.boost.values().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return fail("boosts must be non-negative");
        }
        if self.boost_of(GoalCategory::Neutral) != 0.0 {
            return fail("neutral boost must be 0");
        }
        if !self.theta_ms.is_finite() {
            return fail("theta_ms must be finite");
        }
        Ok(())
    }
}

/// Length and frequency reference values of a stimulus set.
#[derive(Debug, Clone)]
pub struct SetStats {
    pub mean_len: f64,
    pub mean_log_freq: f64,
    log_freq: HashMap<String, f64>,
}

impl SetStats {
    pub fn from_set(set: &StimulusSet) -> Self {
        let n = set.entries.len().max(1) as f64;
        SetStats {
            mean_len: set.entries.iter().map(|e| e.length as f64).sum::<f64>() / n,
            mean_log_freq: set.entries.iter().map(|e| e.log_freq()).sum::<f64>() / n,
            log_freq: set.entries.iter().map(|e| (e.word.clone(), e.log_freq())).collect(),
        }
    }

    fn log_freq_of(&self, word: &str) -> f64 {
        self.log_freq.get(word).copied().unwrap_or(self.mean_log_freq)
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Effective threshold for this trial's word, in ms.
pub fn effective_threshold(params: &SimulantParams, trial: &TrialSpec, stats: &SetStats) -> f64 {
    let len = trial.word.chars().count() as f64;
    params.theta_ms - params.boost_of(trial.category)
        + params.len_coef * (len - stats.mean_len)
        - params.freq_coef * (stats.log_freq_of(&trial.word) - stats.mean_log_freq)
}

/// Probability that the simulant correctly reports the trial's word.
pub fn detect_prob(params: &SimulantParams, trial: &TrialSpec, stats: &SetStats) -> f64 {
    let theta = effective_threshold(params, trial, stats);
    params.guess_floor
        + (1.0 - params.guess_floor) * logistic(params.slope * (trial.stimulus_ms - theta))
}

fn filler(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| (b'a' + rng.random_range(0..26u8)) as char).collect()
}

/// A contiguous fragment of at least three letters wrapped in filler letters.
fn fragment_report(rng: &mut ChaCha8Rng, word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let (start, len) = if n <= 3 {
        (0, n)
    } else {
        let len = rng.random_range(3..=n);
        (rng.random_range(0..=n - len), len)
    };
    let core: String = chars[start..start + len].iter().collect();
    let before = rng.random_range(1..=2);
    let after = rng.random_range(0..=2);
    format!("{}{}{}", filler(rng, before), core, filler(rng, after))
}

fn simulate_report(
    rng: &mut ChaCha8Rng,
    params: &SimulantParams,
    trial: &TrialSpec,
    stats: &SetStats,
    history: &[(TrialSpec, TrialResponse)],
) -> TrialResponse {
    let p = detect_prob(params, trial, stats);
    if rng.random::<f64>() < p {
        if rng.random::<f64>() < params.partial_prob {
            let mut r = TrialResponse::word(trial.index, &fragment_report(rng, &trial.word), Confidence::Unsure);
            r.note = "fragment".into();
            return r;
        }
        return TrialResponse::word(trial.index, &trial.word, Confidence::Confident);
    }
    if rng.random::<f64>() < NO_REPORT_PROB {
        return TrialResponse::no_report(trial.index);
    }
    let perseverate = !history.is_empty() && (trial.mask_text.is_empty() || rng.random::<bool>());
    if perseverate {
        let (earlier, _) = &history[rng.random_range(0..history.len())];
        return TrialResponse::word(trial.index, &earlier.word, Confidence::StatedGuess);
    }
    if !trial.mask_text.is_empty() {
        let mask: Vec<char> = trial.mask_text.to_lowercase().chars().collect();
        let n = rng.random_range(1..=2usize);
        let letters: String = (0..n).map(|_| mask[rng.random_range(0..mask.len())]).collect();
        return TrialResponse::word(trial.index, &letters, Confidence::StatedGuess);
    }
    TrialResponse::no_report(trial.index)
}

/// Generates and scores a synthetic transcript for `plan`.
pub fn simulate_session(
    params: &SimulantParams,
    plan: &TrialPlan,
    set: &StimulusSet,
) -> Result<SessionTranscript, SimulantError> {
    params.validate()?;
    if let Some(t) = plan.trials.iter().find(|t| set.entry(&t.word).is_none()) {
        return Err(SimulantError::UnknownWord(t.word.clone()));
    }
    let stats = SetStats::from_set(set);
    simulate_with_stats(params, plan, &stats)
}

/// As [`simulate_session`] for plans (such as a pre-block) whose words need
/// not belong to the set the reference statistics came from.
pub fn simulate_with_stats(
    params: &SimulantParams,
    plan: &TrialPlan,
    stats: &SetStats,
) -> Result<SessionTranscript, SimulantError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut transcript = SessionTranscript::new(plan.clone(), "simulant");
    transcript.synthetic = true;
    let mut history: Vec<(TrialSpec, TrialResponse)> = Vec::with_capacity(plan.len());
    for trial in &plan.trials {
        let response = simulate_report(&mut rng, params, trial, stats, &history);
        let c = classify(&response, trial, &history)?;
        history.push((trial.clone(), response.clone()));
        transcript.responses.push(response);
        transcript.classifications.push(c);
    }
    Ok(transcript)
}

/// Produces one simulant response for a live session (used by the session
/// tests and the CLI demo). `history` is the block so far.
pub fn respond(
    rng: &mut ChaCha8Rng,
    params: &SimulantParams,
    trial: &TrialSpec,
    stats: &SetStats,
    history: &[(TrialSpec, TrialResponse)],
) -> TrialResponse {
    simulate_report(rng, params, trial, stats, history)
}

/// Stateless 64-bit mixer for deriving per-session seeds.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutcome {
    pub planted: GoalCategory,
    pub sessions: usize,
    /// Share of sessions where the planted category ranks first, splitting
    /// a tie for first evenly among the tied categories.
    pub recovery: f64,
    /// Share of sessions where the planted category is the unique maximum.
    pub strict_recovery: f64,
    pub mean_hit_rate: BTreeMap<GoalCategory, f64>,
}

struct SessionResult {
    credit: f64,
    strict: bool,
    hit_rates: BTreeMap<GoalCategory, f64>,
}

fn run_one(
    planted: GoalCategory,
    params: &SimulantParams,
    set: &StimulusSet,
    stats: &SetStats,
    config: &SessionConfig,
    session_seed: u64,
) -> Result<SessionResult, SimulantError> {
    let plan = build_schedule(set, config, session_seed)?;
    let p = SimulantParams {
        seed: mix_seed(session_seed ^ 0x5349_4d55_4c41_4e54),
        ..params.clone()
    };
    let transcript = simulate_with_stats(&p, &plan, stats)?;
    let stats = category_stats_with(
        &transcript,
        AnalysisOptions {
            include_partials: config.include_partials,
            exclude_invalid: config.exclude_invalid,
        },
    )?;
    let top = GoalCategory::GOALS
        .iter()
        .map(|c| stats.get(*c).hit_rate)
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<GoalCategory> = GoalCategory::GOALS
        .iter()
        .copied()
        .filter(|c| stats.get(*c).hit_rate == top)
        .collect();
    let credit = if tied.contains(&planted) { 1.0 / tied.len() as f64 } else { 0.0 };
    Ok(SessionResult {
        credit,
        strict: tied == [planted],
        hit_rates: stats.per_category.iter().map(|(c, t)| (*c, t.hit_rate)).collect(),
    })
}

/// Runs `n_sessions` simulated sessions end to end and reports how often
/// the analysis ranks the planted category first.
pub fn recovery_rate(
    planted: GoalCategory,
    params: &SimulantParams,
    n_sessions: usize,
    seed: u64,
    set: &StimulusSet,
    config: &SessionConfig,
) -> Result<RecoveryOutcome, SimulantError> {
    if n_sessions == 0 {
        return Err(SimulantError::NoSessions);
    }
    params.validate()?;
    if !planted.is_goal() {
        return Err(SimulantError::Params("planted category must be a goal category".into()));
    }
    if let Some(other) = GoalCategory::GOALS
        .into_iter()
        .find(|c| params.boost_of(*c) > params.boost_of(planted))
    {
        return Err(SimulantError::PlantedNotStrongest { planted, other });
    }
    let stats = SetStats::from_set(set);
    let results: Vec<SessionResult> = (0..n_sessions as u64)
        .into_par_iter()
        .map(|i| run_one(planted, params, set, &stats, config, mix_seed(seed.wrapping_add(i))))
        .collect::<Result<_, _>>()?;

    let n = n_sessions as f64;
    let mut mean_hit_rate: BTreeMap<GoalCategory, f64> = BTreeMap::new();
    for r in &results {
        for (c, h) in &r.hit_rates {
            *mean_hit_rate.entry(*c).or_default() += h / n;
        }
    }
    Ok(RecoveryOutcome {
        planted,
        sessions: n_sessions,
        recovery: results.iter().map(|r| r.credit).sum::<f64>() / n,
        strict_recovery: results.iter().filter(|r| r.strict).count() as f64 / n,
        mean_hit_rate,
    })
}

/// Convenience for tests: fraction of fragment reports scored partial.
pub fn fragment_partial_fraction(samples: usize, seed: u64, set: &StimulusSet) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partial = 0usize;
    for i in 0..samples {
        let entry = &set.entries[i % set.entries.len()];
        let trial = crate::scheduler::trial_from(0, &entry.word, entry.category, &SessionConfig::default(), seed);
        let report = fragment_report(&mut rng, &entry.word);
        let c = classify(&TrialResponse::word(0, &report, Confidence::Unsure), &trial, &[])
            .expect("single trial has empty history");
        if c.kind == Kind::Partial {
            partial += 1;
        }
    }
    partial as f64 / samples as f64
}
