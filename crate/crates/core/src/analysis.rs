//! Per-category hit statistics, rankings, control contrasts, the
//! seen/not-seen by stated/unstated table and memory-probe cross-tabulation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::lexicon::GoalCategory;
use crate::scheduler::TrialPlan;
use crate::scoring::{normalize, Classification, Kind, TrialResponse};
use crate::timing::Verdict;

pub const DISCLAIMER: &str =
    "Descriptive decision support only. These counts are not a clinical inference or diagnosis.";

/// Lower bound on the control baseline used by [`control_contrast`].
pub const BASELINE_FLOOR: f64 = 1.0 / 40.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("structural error: {0}")]
    Structural(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub pid: String,
    pub stated_goals: BTreeSet<GoalCategory>,
    /// Stimulus words the therapist linked to the stated goals. When absent,
    /// every word of a stated category counts as stated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_words: Option<BTreeSet<String>>,
    #[serde(default)]
    pub notes: String,
}

impl ParticipantProfile {
    pub fn new(pid: impl Into<String>, stated_goals: impl IntoIterator<Item = GoalCategory>) -> Self {
        ParticipantProfile {
            pid: pid.into(),
            stated_goals: stated_goals.into_iter().collect(),
            goal_words: None,
            notes: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.stated_goals.contains(&GoalCategory::Neutral) {
            return Err(AnalysisError::Structural(
                "stated goals cannot include the neutral category".into(),
            ));
        }
        Ok(())
    }

    fn is_stated(&self, word: &str, category: GoalCategory) -> bool {
        match &self.goal_words {
            Some(words) => words.contains(word),
            None => self.stated_goals.contains(&category),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub plan: TrialPlan,
    /// One per responded trial, in trial order. Shorter than the plan only
    /// for aborted sessions.
    pub responses: Vec<TrialResponse>,
    pub classifications: Vec<Classification>,
    pub profile_pid: String,
    #[serde(default)]
    pub synthetic: bool,
}

impl SessionTranscript {
    pub fn new(plan: TrialPlan, profile_pid: impl Into<String>) -> Self {
        SessionTranscript {
            plan,
            responses: Vec::new(),
            classifications: Vec::new(),
            profile_pid: profile_pid.into(),
            synthetic: false,
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.responses.len() != self.classifications.len() {
            return Err(AnalysisError::Structural(format!(
                "{} responses but {} classifications",
                self.responses.len(),
                self.classifications.len()
            )));
        }
        if self.responses.len() > self.plan.trials.len() {
            return Err(AnalysisError::Structural("more responses than planned trials".into()));
        }
        for (i, (r, c)) in self.responses.iter().zip(&self.classifications).enumerate() {
            if r.trial_index != i || self.plan.trials[i].index != i {
                return Err(AnalysisError::Structural(format!("trial {i} misaligned")));
            }
            if (c.kind == Kind::Miss) != r.normalized().is_none() {
                return Err(AnalysisError::Structural(format!(
                    "trial {i}: classification disagrees with report presence"
                )));
            }
        }
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.responses.len() == self.plan.trials.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub include_partials: bool,
    pub exclude_invalid: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            include_partials: false,
            exclude_invalid: true,
        }
    }
}

pub fn is_seen(c: &Classification, include_partials: bool) -> bool {
    c.kind == Kind::Correct || (include_partials && c.kind == Kind::Partial)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryTally {
    pub presented: u32,
    pub seen: u32,
    pub hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub per_category: BTreeMap<GoalCategory, CategoryTally>,
    pub excluded_trials: u32,
}

impl CategoryStats {
    pub fn get(&self, c: GoalCategory) -> CategoryTally {
        self.per_category[&c]
    }

    pub fn included_trials(&self) -> u32 {
        self.per_category.values().map(|t| t.presented).sum()
    }
}

/// Trials that enter the statistics, with their classification.
fn included<'a>(
    t: &'a SessionTranscript,
    opts: AnalysisOptions,
) -> impl Iterator<Item = (usize, &'a Classification)> + 'a {
    t.responses
        .iter()
        .zip(&t.classifications)
        .enumerate()
        .filter(move |(_, (r, _))| !(opts.exclude_invalid && r.telemetry_verdict == Verdict::Invalid))
        .map(|(i, (_, c))| (i, c))
}

pub fn category_stats(t: &SessionTranscript, include_partials: bool) -> Result<CategoryStats, AnalysisError> {
    category_stats_with(
        t,
        AnalysisOptions {
            include_partials,
            ..Default::default()
        },
    )
}

pub fn category_stats_with(t: &SessionTranscript, opts: AnalysisOptions) -> Result<CategoryStats, AnalysisError> {
    t.validate()?;
    let mut counts: BTreeMap<GoalCategory, (u32, u32)> =
        GoalCategory::ALL.iter().map(|c| (*c, (0, 0))).collect();
    let mut n_included = 0u32;
    for (i, c) in included(t, opts) {
        n_included += 1;
        let entry = counts.get_mut(&t.plan.trials[i].category).expect("all categories present");
        entry.0 += 1;
        if is_seen(c, opts.include_partials) {
            entry.1 += 1;
        }
    }
    let per_category = counts
        .into_iter()
        .map(|(c, (presented, seen))| {
            let hit_rate = if presented == 0 { 0.0 } else { seen as f64 / presented as f64 };
            (c, CategoryTally { presented, seen, hit_rate })
        })
        .collect();
    Ok(CategoryStats {
        per_category,
        excluded_trials: t.responses.len() as u32 - n_included,
    })
}

/// Goal categories by descending hit rate, ties broken by category id.
pub fn rank_categories(stats: &CategoryStats) -> Vec<GoalCategory> {
    let mut ranked: Vec<GoalCategory> = GoalCategory::GOALS.to_vec();
    ranked.sort_by(|a, b| {
        stats.get(*b)
            .hit_rate
            .total_cmp(&stats.get(*a).hit_rate)
            .then(a.cmp(b))
    });
    ranked
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table1Row {
    pub seen_stated: u32,
    pub seen_unstated: u32,
    pub notseen_stated: u32,
    pub notseen_other: u32,
    pub controls_seen: u32,
    pub goals_mentioned: u32,
    pub controls_not_seen: u32,
}

impl Table1Row {
    /// Trials accounted for by the row (goals_mentioned is not a trial count).
    pub fn partition_total(&self) -> u32 {
        self.seen_stated
            + self.seen_unstated
            + self.notseen_stated
            + self.notseen_other
            + self.controls_seen
            + self.controls_not_seen
    }

    /// The six published columns.
    pub fn columns(&self) -> [u32; 6] {
        [
            self.seen_stated,
            self.seen_unstated,
            self.notseen_stated,
            self.notseen_other,
            self.controls_seen,
            self.goals_mentioned,
        ]
    }
}

pub fn table1_row(
    t: &SessionTranscript,
    profile: &ParticipantProfile,
    include_partials: bool,
) -> Result<Table1Row, AnalysisError> {
    table1_row_with(
        t,
        profile,
        AnalysisOptions {
            include_partials,
            ..Default::default()
        },
    )
}

pub fn table1_row_with(
    t: &SessionTranscript,
    profile: &ParticipantProfile,
    opts: AnalysisOptions,
) -> Result<Table1Row, AnalysisError> {
    t.validate()?;
    profile.validate()?;
    let mut row = Table1Row {
        seen_stated: 0,
        seen_unstated: 0,
        notseen_stated: 0,
        notseen_other: 0,
        controls_seen: 0,
        goals_mentioned: profile.stated_goals.len() as u32,
        controls_not_seen: 0,
    };
    for (i, c) in included(t, opts) {
        let trial = &t.plan.trials[i];
        let seen = is_seen(c, opts.include_partials);
        let slot = if !trial.category.is_goal() {
            if seen { &mut row.controls_seen } else { &mut row.controls_not_seen }
        } else {
            match (seen, profile.is_stated(&trial.word, trial.category)) {
                (true, true) => &mut row.seen_stated,
                (true, false) => &mut row.seen_unstated,
                (false, true) => &mut row.notseen_stated,
                (false, false) => &mut row.notseen_other,
            }
        };
        *slot += 1;
    }
    Ok(row)
}

/// `P(X >= s)` for `X ~ Binomial(n, p)`, by direct summation.
pub fn binomial_upper_tail(n: u32, s: u32, p: f64) -> f64 {
    if s == 0 {
        return 1.0;
    }
    if s > n {
        return 0.0;
    }
    let mut coeff = 1.0f64;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            coeff = coeff * (n - k + 1) as f64 / k as f64;
        }
        if k >= s {
            total += coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        }
    }
    total.min(1.0)
}

/// Probability of each goal category's hit count under the control hit
/// rate, floored at [`BASELINE_FLOOR`].
pub fn control_contrast(stats: &CategoryStats) -> BTreeMap<GoalCategory, f64> {
    let p0 = stats.get(GoalCategory::Neutral).hit_rate.max(BASELINE_FLOOR);
    GoalCategory::GOALS
        .iter()
        .map(|c| {
            let t = stats.get(*c);
            (*c, binomial_upper_tail(t.presented, t.seen, p0))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct MemoryCrosstab {
    pub seen_recalled: u32,
    pub seen_not_recalled: u32,
    pub not_seen_recalled: u32,
    pub not_seen_not_recalled: u32,
    /// Recalled words that were never presented.
    pub extra_list: Vec<String>,
}

pub fn memory_crosstab(
    recalled: &[String],
    t: &SessionTranscript,
    include_partials: bool,
) -> Result<MemoryCrosstab, AnalysisError> {
    t.validate()?;
    let recalled: BTreeSet<String> = recalled.iter().filter_map(|r| normalize(r)).collect();
    let mut out = MemoryCrosstab::default();
    for (i, trial) in t.plan.trials.iter().enumerate() {
        let seen = t
            .classifications
            .get(i)
            .is_some_and(|c| is_seen(c, include_partials));
        let cell = match (seen, recalled.contains(&trial.word)) {
            (true, true) => &mut out.seen_recalled,
            (true, false) => &mut out.seen_not_recalled,
            (false, true) => &mut out.not_seen_recalled,
            (false, false) => &mut out.not_seen_not_recalled,
        };
        *cell += 1;
    }
    let presented: BTreeSet<&str> = t.plan.trials.iter().map(|t| t.word.as_str()).collect();
    out.extra_list = recalled
        .into_iter()
        .filter(|r| !presented.contains(r.as_str()))
        .collect();
    Ok(out)
}

/// A wrong report that shared enough letters with the target to be scored
/// partial, e.g. an inflected form of the stimulus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NearMiss {
    pub trial_index: usize,
    pub presented: String,
    pub reported: String,
    pub lcs_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub pid: String,
    pub per_category: BTreeMap<GoalCategory, CategoryTally>,
    pub ranking: Vec<GoalCategory>,
    pub table1: Table1Row,
    pub control_contrast: BTreeMap<GoalCategory, f64>,
    pub excluded_trials: u32,
    pub near_misses: Vec<NearMiss>,
    pub memory: Option<MemoryCrosstab>,
    pub include_partials: bool,
    pub aborted: bool,
    pub synthetic: bool,
    pub session_ordinal: u32,
    pub trials_responded: u32,
    /// Set when the table does not account for every responded trial.
    pub partition_warning: Option<String>,
    pub disclaimer: String,
}

#[derive(Debug, Clone, Default)]
pub struct ReportContext<'a> {
    pub aborted: bool,
    pub session_ordinal: u32,
    pub recalled: Option<&'a [String]>,
}

pub fn build_report(
    t: &SessionTranscript,
    profile: &ParticipantProfile,
    opts: AnalysisOptions,
    ctx: ReportContext<'_>,
) -> Result<SensitivityReport, AnalysisError> {
    let stats = category_stats_with(t, opts)?;
    let table1 = table1_row_with(t, profile, opts)?;
    let responded = t.responses.len() as u32;
    let accounted = table1.partition_total() + stats.excluded_trials;
    let partition_warning = (accounted != responded).then(|| {
        format!("table accounts for {accounted} trials but {responded} were responded")
    });
    let near_misses = t
        .responses
        .iter()
        .zip(&t.classifications)
        .filter(|(_, c)| c.kind == Kind::Partial)
        .map(|(r, c)| NearMiss {
            trial_index: r.trial_index,
            presented: t.plan.trials[r.trial_index].word.clone(),
            reported: r.normalized().unwrap_or_default(),
            lcs_len: c.lcs_len,
        })
        .collect();
    let memory = ctx
        .recalled
        .map(|r| memory_crosstab(r, t, opts.include_partials))
        .transpose()?;
    Ok(SensitivityReport {
        pid: profile.pid.clone(),
        ranking: rank_categories(&stats),
        control_contrast: control_contrast(&stats),
        excluded_trials: stats.excluded_trials,
        per_category: stats.per_category,
        table1,
        near_misses,
        memory,
        include_partials: opts.include_partials,
        aborted: ctx.aborted,
        synthetic: t.synthetic,
        session_ordinal: ctx.session_ordinal,
        trials_responded: responded,
        partition_warning,
        disclaimer: DISCLAIMER.to_string(),
    })
}

/// Plain-text rendering for the terminal and for printing.
pub fn render_text(r: &SensitivityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Participant {}  (session #{})", r.pid, r.session_ordinal);
    if r.aborted {
        let _ = writeln!(s, "PARTIAL SESSION: stopped after {} trials", r.trials_responded);
    }
    if r.synthetic {
        let _ = writeln!(s, "synthetic transcript");
    }
    let _ = writeln!(
        s,
        "seen = {}",
        if r.include_partials { "correct or partial" } else { "correct only" }
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<16} {:>9} {:>5} {:>8} {:>10}", "category", "presented", "seen", "hit rate", "P(>=seen)");
    for c in r.ranking.iter().chain(std::iter::once(&GoalCategory::Neutral)) {
        let t = r.per_category[c];
        let p = r
            .control_contrast
            .get(c)
            .map(|p| format!("{p:.5}"))
            .unwrap_or_else(|| "baseline".into());
        let _ = writeln!(s, "{:<16} {:>9} {:>5} {:>8.3} {:>10}", c.as_str(), t.presented, t.seen, t.hit_rate, p);
    }
    let t = &r.table1;
    let _ = writeln!(s);
    let _ = writeln!(s, "seen, stated goals:       {}", t.seen_stated);
    let _ = writeln!(s, "seen, unstated goals:     {}", t.seen_unstated);
    let _ = writeln!(s, "not seen, stated goals:   {}", t.notseen_stated);
    let _ = writeln!(s, "not seen, other goals:    {}", t.notseen_other);
    let _ = writeln!(s, "controls seen:            {}", t.controls_seen);
    let _ = writeln!(s, "goals mentioned:          {}", t.goals_mentioned);
    let _ = writeln!(s, "excluded trials:          {}", r.excluded_trials);
    if let Some(w) = &r.partition_warning {
        let _ = writeln!(s, "warning: {w}");
    }
    if !r.near_misses.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "near misses:");
        for n in &r.near_misses {
            let _ = writeln!(s, "  trial {:>2}: reported '{}' for '{}'", n.trial_index, n.reported, n.presented);
        }
    }
    if let Some(m) = &r.memory {
        let _ = writeln!(s);
        let _ = writeln!(s, "memory probe      recalled  not recalled");
        let _ = writeln!(s, "  seen            {:>8}  {:>12}", m.seen_recalled, m.seen_not_recalled);
        let _ = writeln!(s, "  not seen        {:>8}  {:>12}", m.not_seen_recalled, m.not_seen_not_recalled);
        if !m.extra_list.is_empty() {
            let _ = writeln!(s, "  extra-list recalls: {}", m.extra_list.join(", "));
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{}", r.disclaimer);
    s
}
