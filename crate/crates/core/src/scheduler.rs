//! Presentation schedules and pattern masks.
//!
//! A main-block plan opens with three neutral words, then presents the
//! remaining 35 goal words and 2 neutral words in a seeded random order.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::lexicon::{GoalCategory, LexiconError, StimulusSet};

pub const LEADING_CONTROLS: usize = 3;

/// Consonant mask alphabet.
pub const MASK_ALPHABET: &[u8] = b"BCDFGHJKLMNPQRSTVWXZ";

#[derive(Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("plan file line {line}: {reason}")]
    PlanFile { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One presentation. Field order is the plan-file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub index: usize,
    pub word: String,
    pub category: GoalCategory,
    pub stimulus_ms: f64,
    pub mask_enabled: bool,
    pub mask_ms: f64,
    pub mask_text: String,
    pub inter_trial_pause_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Preblock,
    Main,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub trials: Vec<TrialSpec>,
    pub seed: u64,
    pub set_id: String,
    pub block: Block,
}

impl TrialPlan {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Writes one JSON record per trial.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), ScheduleError> {
        for t in &self.trials {
            serde_json::to_writer(&mut out, t).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

/// Reads trial records written by [`TrialPlan::write_jsonl`].
pub fn read_plan_jsonl<R: BufRead>(input: R) -> Result<Vec<TrialSpec>, ScheduleError> {
    let mut trials = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TrialSpec = serde_json::from_str(&line).map_err(|e| ScheduleError::PlanFile {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if t.index != trials.len() {
            return Err(ScheduleError::PlanFile {
                line: i + 1,
                reason: format!("expected trial index {}, found {}", trials.len(), t.index),
            });
        }
        trials.push(t);
    }
    Ok(trials)
}

fn mask_rng(seed: u64, trial_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // stream 0 drives ordering; each trial's mask gets its own stream
    rng.set_stream(trial_index as u64 + 1);
    rng
}

/// Mask drawn from the consonant alphabet, `len(word) + 2` letters long.
pub fn mask_for(word: &str, seed: u64, trial_index: usize) -> String {
    mask_with_alphabet(word, seed, trial_index, MASK_ALPHABET)
}

/// Like [`mask_for`] but optionally adding `O` to the alphabet.
pub fn mask_for_config(word: &str, seed: u64, trial_index: usize, include_o: bool) -> String {
    if include_o {
        mask_with_alphabet(word, seed, trial_index, b"BCDFGHJKLMNOPQRSTVWXZ")
    } else {
        mask_for(word, seed, trial_index)
    }
}

fn mask_with_alphabet(word: &str, seed: u64, trial_index: usize, alphabet: &[u8]) -> String {
    let len = word.chars().count() + 2;
    let mut rng = mask_rng(seed, trial_index);
    loop {
        let mask: String = (0..len)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())] as char)
            .collect();
        // lengths differ, so this only guards against future length rules
        if !mask.eq_ignore_ascii_case(word) {
            return mask;
        }
    }
}

pub(crate) fn trial_from(
    index: usize,
    word: &str,
    category: GoalCategory,
    config: &SessionConfig,
    mask_seed: u64,
) -> TrialSpec {
    TrialSpec {
        index,
        word: word.to_string(),
        category,
        stimulus_ms: config.stimulus_ms,
        mask_enabled: config.mask_enabled,
        mask_ms: config.mask_ms,
        mask_text: if config.mask_enabled {
            mask_for_config(word, mask_seed, index, config.mask_include_o)
        } else {
            String::new()
        },
        inter_trial_pause_ms: config.inter_trial_pause_ms,
    }
}

/// Builds the 40-trial main-block plan.
pub fn build_schedule(
    set: &StimulusSet,
    config: &SessionConfig,
    seed: u64,
) -> Result<TrialPlan, ScheduleError> {
    set.check_design()?;
    config.validate().map_err(ScheduleError::Config)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // entries are sorted by (category, word), so these lists are canonical
    let mut neutral: Vec<_> = set.words_in(GoalCategory::Neutral).collect();
    neutral.shuffle(&mut rng);
    let (lead, rest) = neutral.split_at(LEADING_CONTROLS);
    let mut tail: Vec<_> = set
        .entries
        .iter()
        .filter(|e| e.category.is_goal())
        .chain(rest.iter().copied())
        .collect();
    tail.sort_by(|a, b| a.word.cmp(&b.word));
    tail.shuffle(&mut rng);

    let trials = lead
        .iter()
        .copied()
        .chain(tail)
        .enumerate()
        .map(|(i, e)| trial_from(i, &e.word, e.category, config, seed))
        .collect();
    Ok(TrialPlan {
        trials,
        seed,
        set_id: set.content_hash(),
        block: Block::Main,
    })
}
