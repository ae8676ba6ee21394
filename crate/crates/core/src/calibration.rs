//! Duration staircase: step down one rung of the ladder whenever a block
//! yields more hits than the cutoff, and the neutral pre-block that feeds it.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::lexicon::{GoalCategory, LexiconEntry, STANDARD_SET_SIZE};
use crate::scheduler::{trial_from, Block, TrialPlan};

// keeps pre-block masks and ordering independent of the main plan's
const PREBLOCK_SALT: u64 = 0x5052_4542_4c4f_434b;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CalibrationError {
    #[error("hits ({hits}) exceed trials ({trials})")]
    HitsExceedTrials { hits: u32, trials: u32 },
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("neutral pool has {available} words, pre-block needs {required}")]
    PoolTooSmall { available: usize, required: usize },
    #[error("pre-block pool word '{0}' is not neutral")]
    NotNeutral(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationPolicy {
    pub ladder_ms: Vec<f64>,
    /// Hits above this (per 40 trials) trigger a step down.
    pub hit_cutoff: u32,
    pub preblock_size: usize,
    /// Overrides the proportionally scaled cutoff for the pre-block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preblock_hit_cutoff: Option<u32>,
}

impl Default for CalibrationPolicy {
    fn default() -> Self {
        CalibrationPolicy {
            ladder_ms: vec![50.0, 40.0, 30.0],
            hit_cutoff: 6,
            preblock_size: 10,
            preblock_hit_cutoff: None,
        }
    }
}

impl CalibrationPolicy {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.ladder_ms.is_empty() {
            return Err(CalibrationError::Policy("ladder is empty".into()));
        }
        if self.ladder_ms.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(CalibrationError::Policy("ladder durations must be positive".into()));
        }
        if self.ladder_ms.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CalibrationError::Policy("ladder must be strictly descending".into()));
        }
        if self.hit_cutoff == 0 || self.hit_cutoff as usize >= STANDARD_SET_SIZE {
            return Err(CalibrationError::Policy("hit_cutoff must lie in 1..40".into()));
        }
        if self.preblock_size == 0 {
            return Err(CalibrationError::Policy("preblock_size must be positive".into()));
        }
        Ok(())
    }

    /// Cutoff for a block of `trials`: the 40-trial cutoff scaled
    /// proportionally and rounded up, so 10 trials gives `ceil(6/4) = 2`.
    pub fn cutoff_for(&self, trials: u32) -> u32 {
        if trials as usize == self.preblock_size {
            if let Some(c) = self.preblock_hit_cutoff {
                return c;
            }
        }
        let scaled = self.hit_cutoff as u64 * trials as u64;
        scaled.div_ceil(STANDARD_SET_SIZE as u64) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub duration_ms: f64,
    pub hits: u32,
    pub trials: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CalibrationState {
    pub rung: usize,
    pub history: Vec<CalibrationStep>,
}

impl CalibrationState {
    pub fn duration_ms(&self, policy: &CalibrationPolicy) -> f64 {
        policy.ladder_ms[self.rung]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Descend,
    Hold,
    FloorFlagged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    pub duration_ms: f64,
}

/// Applies the cutoff rule to one block's result and returns the new state.
pub fn next_duration(
    state: &CalibrationState,
    hits: u32,
    trials: u32,
    policy: &CalibrationPolicy,
) -> Result<(CalibrationState, Decision), CalibrationError> {
    if hits > trials {
        return Err(CalibrationError::HitsExceedTrials { hits, trials });
    }
    policy.validate()?;
    if state.rung >= policy.ladder_ms.len() {
        return Err(CalibrationError::Policy(format!("rung {} beyond ladder", state.rung)));
    }
    let mut next = state.clone();
    next.history.push(CalibrationStep {
        duration_ms: policy.ladder_ms[state.rung],
        hits,
        trials,
    });
    let action = if hits > policy.cutoff_for(trials) {
        if state.rung + 1 < policy.ladder_ms.len() {
            next.rung += 1;
            Action::Descend
        } else {
            Action::FloorFlagged
        }
    } else {
        Action::Hold
    };
    let decision = Decision {
        action,
        duration_ms: policy.ladder_ms[next.rung],
    };
    Ok((next, decision))
}

/// Neutral calibration block at the config's current stimulus duration.
///
/// Words in `avoid` (normally the main set's neutral exemplars) are only
/// used when the pool cannot fill the block without them.
pub fn build_preblock(
    neutral_pool: &[LexiconEntry],
    config: &SessionConfig,
    seed: u64,
    avoid: &[String],
) -> Result<TrialPlan, CalibrationError> {
    let size = config.policy.preblock_size;
    if let Some(e) = neutral_pool.iter().find(|e| e.category != GoalCategory::Neutral) {
        return Err(CalibrationError::NotNeutral(e.word.clone()));
    }
    let words: BTreeSet<&str> = neutral_pool.iter().map(|e| e.word.as_str()).collect();
    if words.len() < size {
        return Err(CalibrationError::PoolTooSmall {
            available: words.len(),
            required: size,
        });
    }
    let avoid: BTreeSet<&str> = avoid.iter().map(String::as_str).collect();
    let (mut fresh, mut reused): (Vec<&str>, Vec<&str>) =
        words.into_iter().partition(|w| !avoid.contains(w));

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PREBLOCK_SALT);
    fresh.shuffle(&mut rng);
    reused.shuffle(&mut rng);
    let mut chosen: Vec<&str> = fresh.into_iter().chain(reused).take(size).collect();
    chosen.shuffle(&mut rng);

    let mut ids: Vec<&str> = chosen.clone();
    ids.sort_unstable();
    let trials = chosen
        .iter()
        .enumerate()
        .map(|(i, w)| trial_from(i, w, GoalCategory::Neutral, config, seed ^ PREBLOCK_SALT))
        .collect();
    Ok(TrialPlan {
        trials,
        seed,
        set_id: format!("preblock:{}", ids.join(",")),
        block: Block::Preblock,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::default_neutral_pool;
    use proptest::prelude::*;

    fn policy() -> CalibrationPolicy {
        CalibrationPolicy::default()
    }

    #[test]
    fn descend_hold_floor() {
        let s0 = CalibrationState::default();
        let (s1, d) = next_duration(&s0, 37, 40, &policy()).unwrap();
        assert_eq!((d.action, d.duration_ms), (Action::Descend, 40.0));
        assert_eq!(s1.history.len(), 1);
        let (_, d) = next_duration(&s0, 5, 40, &policy()).unwrap();
        assert_eq!((d.action, d.duration_ms), (Action::Hold, 50.0));
        let at_floor = CalibrationState { rung: 2, history: vec![] };
        let (s, d) = next_duration(&at_floor, 12, 40, &policy()).unwrap();
        assert_eq!((d.action, d.duration_ms, s.rung), (Action::FloorFlagged, 30.0, 2));
    }

    #[test]
    fn cutoff_is_exclusive() {
        let s0 = CalibrationState::default();
        assert_eq!(next_duration(&s0, 6, 40, &policy()).unwrap().1.action, Action::Hold);
        assert_eq!(next_duration(&s0, 7, 40, &policy()).unwrap().1.action, Action::Descend);
    }

    #[test]
    fn preblock_cutoff_scaled() {
        let p = policy();
        assert_eq!(p.cutoff_for(10), 2);
        assert_eq!(p.cutoff_for(40), 6);
        let s0 = CalibrationState::default();
        assert_eq!(next_duration(&s0, 3, 10, &p).unwrap().1.action, Action::Descend);
        assert_eq!(next_duration(&s0, 2, 10, &p).unwrap().1.action, Action::Hold);
        let p = CalibrationPolicy { preblock_hit_cutoff: Some(4), ..policy() };
        assert_eq!(next_duration(&s0, 3, 10, &p).unwrap().1.action, Action::Hold);
    }

    #[test]
    fn errors() {
        let s0 = CalibrationState::default();
        assert!(matches!(next_duration(&s0, 5, 4, &policy()), Err(CalibrationError::HitsExceedTrials { .. })));
        let bad = CalibrationPolicy { ladder_ms: vec![40.0, 50.0], ..policy() };
        assert!(next_duration(&s0, 1, 40, &bad).is_err());
        let bad = CalibrationPolicy { hit_cutoff: 40, ..policy() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn preblock_plan() {
        let pool: Vec<_> = default_neutral_pool().into_iter().take(12).collect();
        let cfg = SessionConfig::default();
        let a = build_preblock(&pool, &cfg, 11, &[]).unwrap();
        let b = build_preblock(&pool, &cfg, 11, &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.trials.iter().all(|t| t.category == GoalCategory::Neutral && t.stimulus_ms == 50.0));
        assert_eq!(a.block, Block::Preblock);
        let too_small: Vec<_> = pool.iter().take(9).cloned().collect();
        assert!(matches!(build_preblock(&too_small, &cfg, 1, &[]), Err(CalibrationError::PoolTooSmall { .. })));
    }

    #[test]
    fn preblock_avoids_main_words_when_possible() {
        let pool: Vec<_> = default_neutral_pool().into_iter().take(12).collect();
        let avoid: Vec<String> = pool.iter().take(2).map(|e| e.word.clone()).collect();
        let plan = build_preblock(&pool, &SessionConfig::default(), 5, &avoid).unwrap();
        assert!(plan.trials.iter().all(|t| !avoid.contains(&t.word)));
        let avoid: Vec<String> = pool.iter().take(5).map(|e| e.word.clone()).collect();
        let plan = build_preblock(&pool, &SessionConfig::default(), 5, &avoid).unwrap();
        assert_eq!(plan.trials.iter().filter(|t| avoid.contains(&t.word)).count(), 3);
    }

    #[test]
    fn preblock_orderings_vary_with_seed() {
        let pool: Vec<_> = default_neutral_pool().into_iter().take(12).collect();
        let cfg = SessionConfig::default();
        for s in 0..100u64 {
            let a = build_preblock(&pool, &cfg, 2 * s, &[]).unwrap();
            let b = build_preblock(&pool, &cfg, 2 * s + 1, &[]).unwrap();
            let wa: Vec<_> = a.trials.iter().map(|t| &t.word).collect();
            let wb: Vec<_> = b.trials.iter().map(|t| &t.word).collect();
            assert_ne!(wa, wb);
        }
    }

    proptest! {
        #[test]
        fn never_ascends(blocks in proptest::collection::vec((0u32..=40, 40u32..=40), 1..12)) {
            let p = policy();
            let mut s = CalibrationState::default();
            let mut last = s.duration_ms(&p);
            let mut descents = 0;
            for (hits, trials) in blocks {
                let (n, d) = next_duration(&s, hits, trials, &p).unwrap();
                prop_assert!(d.duration_ms <= last);
                if d.action == Action::Descend { descents += 1; }
                prop_assert_eq!(d.duration_ms, p.ladder_ms[descents]);
                last = d.duration_ms;
                s = n;
            }
        }
    }
}
