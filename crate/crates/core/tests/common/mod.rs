#![allow(dead_code)]

use std::collections::BTreeSet;

use goalsight_core::analysis::{ParticipantProfile, SessionTranscript};
use goalsight_core::lexicon::{default_set, GoalCategory, StimulusSet};
use goalsight_core::scheduler::{Block, TrialSpec};
use goalsight_core::scoring::{classify, TrialResponse};
use goalsight_core::session::{CreateSession, NextTrial, Phase, SessionStore};
use goalsight_core::simulant::{respond, SetStats, SimulantParams};
use goalsight_core::timing::{TrialTelemetry, Verdict};
use goalsight_core::{build_schedule, SessionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counts a Table 1 fixture must reproduce, plus how the trials realizing
/// them are laid out.
pub struct RowFixture {
    pub stated: Vec<GoalCategory>,
    /// Words the therapist linked to the stated goals.
    pub linked: Vec<&'static str>,
    pub seen_linked: usize,
    pub seen_other: usize,
    pub controls_seen: usize,
    /// Unlinked goal trials whose telemetry was invalid.
    pub excluded: usize,
}

pub fn row1() -> RowFixture {
    RowFixture {
        stated: vec![GoalCategory::Power, GoalCategory::Belonging],
        linked: vec![
            "power", "force", "dominance", "control", "authority", "liked", "together", "love",
            "belonging", "cherished", "win",
        ],
        seen_linked: 9,
        seen_other: 14,
        controls_seen: 3,
        excluded: 2,
    }
}

pub fn row5() -> RowFixture {
    RowFixture {
        stated: vec![GoalCategory::Safety, GoalCategory::Acceptance],
        linked: vec!["safety", "secure", "stable", "reliable", "protected", "accepted", "approval"],
        seen_linked: 5,
        seen_other: 27,
        controls_seen: 5,
        excluded: 0,
    }
}

pub fn row7() -> RowFixture {
    RowFixture {
        stated: vec![GoalCategory::Existential, GoalCategory::FeelingBetter],
        linked: vec!["meaning", "purpose", "plan", "existence"],
        seen_linked: 4,
        seen_other: 23,
        controls_seen: 3,
        excluded: 2,
    }
}

/// Whether a trial is reported correctly and whether its telemetry is
/// invalid, assigned in trial order.
pub fn fixture_outcomes(f: &RowFixture, plan: &[TrialSpec]) -> Vec<(bool, bool)> {
    let linked: BTreeSet<&str> = f.linked.iter().copied().collect();
    let (mut sl, mut so, mut cs, mut ex) = (0, 0, 0, 0);
    plan.iter()
        .map(|t| {
            if !t.category.is_goal() {
                cs += 1;
                (cs <= f.controls_seen, false)
            } else if linked.contains(t.word.as_str()) {
                sl += 1;
                (sl <= f.seen_linked, false)
            } else if ex < f.excluded {
                ex += 1;
                (true, true)
            } else {
                so += 1;
                (so <= f.seen_other, false)
            }
        })
        .collect()
}

pub fn fixture_profile(pid: &str, f: &RowFixture) -> ParticipantProfile {
    let mut p = ParticipantProfile::new(pid, f.stated.iter().copied());
    p.goal_words = Some(f.linked.iter().map(|w| w.to_string()).collect());
    p
}

pub fn fixture_transcript(f: &RowFixture, seed: u64) -> SessionTranscript {
    let plan = build_schedule(&default_set(), &SessionConfig::default(), seed).unwrap();
    let outcomes = fixture_outcomes(f, &plan.trials);
    let mut t = SessionTranscript::new(plan, "p01");
    let mut history = Vec::new();
    for (spec, (seen, invalid)) in t.plan.trials.clone().into_iter().zip(outcomes) {
        let mut r = if seen {
            TrialResponse::word(spec.index, &spec.word, Default::default())
        } else {
            TrialResponse::no_report(spec.index)
        };
        if invalid {
            r.telemetry_verdict = Verdict::Invalid;
        }
        let c = classify(&r, &spec, &history).unwrap();
        history.push((spec, r.clone()));
        t.responses.push(r);
        t.classifications.push(c);
    }
    t
}

/// Telemetry matching the planned frames, off by `off` frames.
pub fn telemetry(trial_index: usize, frames: u32, off: u32) -> TrialTelemetry {
    TrialTelemetry {
        trial_index,
        stimulus_frames_shown: frames + off,
        stimulus_span_ms: (frames + off) as f64 * 1000.0 / 60.0,
        mask_span_ms: 100.0,
        dropped_frames: 0,
    }
}

/// Runs one session to completion with the simulant as participant.
/// Choices (pre-block, memory probe, telemetry noise, aborts) are drawn
/// from `seed`.
pub fn drive_simulated(store: &SessionStore, pid: &str, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = SessionConfig {
        preblock: rng.random::<bool>(),
        memory_probe: rng.random::<bool>(),
        include_partials: rng.random::<bool>(),
        ..Default::default()
    };
    let mut req = CreateSession::new(pid);
    req.config = config;
    req.seed = Some(seed);
    req.stated_goals = vec![GoalCategory::GOALS[rng.random_range(0..7)]];
    let id = store.create(&req).unwrap().session_id;
    store.start(&id, Some(60.0)).unwrap();

    let state = store.state(&id).unwrap();
    let stats = SetStats::from_set(&state.set);
    let mut params = SimulantParams {
        seed: rng.random(),
        ..Default::default()
    };
    params.boost.insert(req.stated_goals[0], 15.0);
    let mut sim_rng = ChaCha8Rng::seed_from_u64(params.seed);
    let abort_at = rng.random_bool(0.1).then(|| rng.random_range(0..40usize));
    let mut history: Vec<(TrialSpec, TrialResponse)> = Vec::new();
    let mut block = Block::Preblock;
    loop {
        match store.next_trial(&id).unwrap() {
            NextTrial::Trial(s) => {
                if s.block != block {
                    block = s.block;
                    history.clear();
                }
                if block == Block::Main && Some(s.trial.index) == abort_at {
                    store.abort(&id).unwrap();
                    continue;
                }
                // re-serving before the response is idempotent
                if rng.random_bool(0.1) {
                    assert_eq!(store.next_trial(&id).unwrap(), NextTrial::Trial(s.clone()));
                }
                if rng.random_bool(0.5) {
                    let off = [0, 0, 0, 1, 3][rng.random_range(0..5)];
                    store
                        .record_telemetry(&id, None, &telemetry(s.trial.index, s.stimulus.frames, off))
                        .unwrap();
                }
                let r = respond(&mut sim_rng, &params, &s.trial, &stats, &history);
                store.record_response(&id, &r).unwrap();
                history.push((s.trial, r));
            }
            NextTrial::PhaseAdvance { phase: Phase::MemoryProbe } => {
                let words: Vec<String> = history
                    .iter()
                    .filter(|_| rng.random_bool(0.3))
                    .map(|(t, _)| t.word.clone())
                    .collect();
                store.submit_recall(&id, &words).unwrap();
            }
            NextTrial::PhaseAdvance { phase: Phase::Debrief } => {
                store.finalize(&id).unwrap();
                break;
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    id
}

pub fn set() -> StimulusSet {
    default_set()
}
