mod common;

use std::fs;

use goalsight_core::analysis::Table1Row;
use goalsight_core::calibration::Action;
use goalsight_core::lexicon::GoalCategory;
use goalsight_core::scheduler::Block;
use goalsight_core::scoring::{Kind, TrialResponse};
use goalsight_core::session::{
    read_log, replay, CreateSession, Durability, Event, NextTrial, Phase, SessionError, SessionStore,
};
use goalsight_core::timing::Verdict;
use goalsight_core::SessionConfig;

fn store() -> (tempfile::TempDir, SessionStore) {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    (dir, store)
}

fn request(pid: &str, seed: u64) -> CreateSession {
    let mut r = CreateSession::new(pid);
    r.seed = Some(seed);
    r.stated_goals = vec![GoalCategory::Power];
    r
}

fn serve(store: &SessionStore, id: &str) -> goalsight_core::session::ServedTrial {
    match store.next_trial(id).unwrap() {
        NextTrial::Trial(s) => s,
        other => panic!("expected a trial, got {other:?}"),
    }
}

#[test]
fn created_then_started() {
    let (_d, store) = store();
    let s = store.create(&request("P01", 1)).unwrap();
    assert_eq!(s.phase, Phase::Created);
    assert_eq!(s.cursor, 0);
    assert_eq!(s.session_ordinal, 1);
    assert!(matches!(store.next_trial(&s.session_id), Err(SessionError::Lifecycle(_))));
    let s = store.start(&s.session_id, None).unwrap();
    assert_eq!(s.phase, Phase::Running);
    assert!(s.consent_confirmed);
    assert_eq!(serve(&store, &s.session_id).trial.index, 0);
}

#[test]
fn same_seed_same_plan_and_rerun_rules() {
    let (_d, store) = store();
    let a = store.create(&request("P01", 5)).unwrap();
    let b = store.create(&request("P02", 5)).unwrap();
    assert_eq!(a.transcript.plan, b.transcript.plan);
    let err = store.create(&request("P01", 5)).unwrap_err();
    assert_eq!(err.code(), "structural");
    let c = store.create(&request("P01", 6)).unwrap();
    assert_eq!(c.session_ordinal, 2);
}

#[test]
fn privacy_guards() {
    let (d, store) = store();
    let err = store.create(&request("jane@example.com", 1)).unwrap_err();
    assert_eq!(err.code(), "privacy");
    let mut r = request("P01", 1);
    r.notes = "reach at 555-123-4567".into();
    assert_eq!(store.create(&r).unwrap_err().code(), "privacy");
    assert_eq!(fs::read_dir(d.path()).unwrap().count(), 0);
}

#[test]
fn serving_is_idempotent_and_ordered() {
    let (_d, store) = store();
    let id = store.create(&request("P01", 2)).unwrap().session_id;
    store.start(&id, Some(60.0)).unwrap();
    let first = serve(&store, &id);
    assert_eq!(serve(&store, &id), first);
    assert_eq!(first.stimulus.frames, 3);
    assert_eq!(first.mask.unwrap().frames, 6);

    let before = store.state(&id).unwrap();
    let err = store.record_response(&id, &TrialResponse::no_report(1)).unwrap_err();
    assert_eq!(err.code(), "sequencing");
    assert_eq!(store.state(&id).unwrap(), before);

    store.record_response(&id, &TrialResponse::no_report(0)).unwrap();
    // a response without a served trial is out of sequence
    let err = store.record_response(&id, &TrialResponse::no_report(1)).unwrap_err();
    assert_eq!(err.code(), "sequencing");
    assert_eq!(serve(&store, &id).trial.index, 1);

    // one served event per trial in the log
    let log = read_log(&store.log_path(&id)).unwrap().records;
    let served = log.iter().filter(|r| matches!(r.event, Event::TrialServed(_))).count();
    assert_eq!(served, 2);
}

#[test]
fn partial_on_power_trial() {
    let (_d, store) = store();
    let id = store.create(&request("P01", 3)).unwrap().session_id;
    store.start(&id, None).unwrap();
    loop {
        let s = serve(&store, &id);
        if s.trial.word == "power" {
            let c = store
                .record_response(&id, &TrialResponse::word(s.trial.index, "towel", Default::default()))
                .unwrap();
            assert_eq!(c.kind, Kind::Partial);
            break;
        }
        store.record_response(&id, &TrialResponse::no_report(s.trial.index)).unwrap();
    }
}

#[test]
fn preblock_descend_requantizes_main_block() {
    let (_d, store) = store();
    let mut r = request("P01", 4);
    r.config = SessionConfig {
        preblock: true,
        ..Default::default()
    };
    let id = store.create(&r).unwrap().session_id;
    let s = store.start(&id, Some(75.0)).unwrap();
    assert_eq!(s.phase, Phase::Preblock);
    for i in 0..10 {
        let t = serve(&store, &id);
        assert_eq!(t.block, Block::Preblock);
        assert_eq!(t.trial.category, GoalCategory::Neutral);
        let resp = if i < 3 {
            TrialResponse::word(i, &t.trial.word, Default::default())
        } else {
            TrialResponse::no_report(i)
        };
        store.record_response(&id, &resp).unwrap();
    }
    let s = store.state(&id).unwrap();
    assert_eq!(s.phase, Phase::Running);
    assert_eq!(s.cursor, 0);
    let change = &s.calibration_log[0];
    assert_eq!((change.hits, change.trials), (3, 10));
    assert_eq!(change.decision.action, Action::Descend);
    assert_eq!(change.decision.duration_ms, 40.0);
    assert_eq!(change.stimulus.frames, 3);
    assert!(s.transcript.plan.trials.iter().all(|t| t.stimulus_ms == 40.0));
    let t = serve(&store, &id);
    assert_eq!((t.block, t.trial.index, t.stimulus.frames), (Block::Main, 0, 3));
    assert_eq!(t.stimulus.achieved_ms, 40.0);

    // pre-block words stay out of the main set's neutral words
    let pre = s.preblock.as_ref().unwrap();
    for t in &pre.plan.trials {
        assert!(s.set.entry(&t.word).is_none());
    }
}

#[test]
fn preblock_hold_at_two_hits() {
    let (_d, store) = store();
    let mut r = request("P01", 4);
    r.config.preblock = true;
    let id = store.create(&r).unwrap().session_id;
    store.start(&id, None).unwrap();
    for i in 0..10 {
        let t = serve(&store, &id);
        let resp = if i < 2 {
            TrialResponse::word(i, &t.trial.word, Default::default())
        } else {
            TrialResponse::no_report(i)
        };
        store.record_response(&id, &resp).unwrap();
    }
    let s = store.state(&id).unwrap();
    assert_eq!(s.calibration_log[0].decision.action, Action::Hold);
    assert!(s.transcript.plan.trials.iter().all(|t| t.stimulus_ms == 50.0));
}

#[test]
fn complete_session_finalizes_once() {
    let (_d, store) = store();
    let mut r = request("P01", 8);
    r.config.memory_probe = true;
    let id = store.create(&r).unwrap().session_id;
    store.start(&id, None).unwrap();
    assert_eq!(store.finalize(&id).unwrap_err().code(), "sequencing");
    for _ in 0..40 {
        let t = serve(&store, &id);
        let resp = if t.trial.category == GoalCategory::Power {
            TrialResponse::word(t.trial.index, &t.trial.word, Default::default())
        } else {
            TrialResponse::no_report(t.trial.index)
        };
        store.record_response(&id, &resp).unwrap();
    }
    assert_eq!(
        store.next_trial(&id).unwrap(),
        NextTrial::PhaseAdvance { phase: Phase::MemoryProbe }
    );
    store.submit_recall(&id, &["power".into(), "zebra".into()]).unwrap();
    let report = store.finalize(&id).unwrap();
    assert_eq!(report.table1.partition_total(), 40);
    assert_eq!(report.ranking[0], GoalCategory::Power);
    let mem = report.memory.as_ref().unwrap();
    assert_eq!(mem.seen_recalled, 1);
    assert_eq!(mem.extra_list, vec!["zebra".to_string()]);
    assert_eq!(store.finalize(&id).unwrap_err().code(), "lifecycle");
    assert_eq!(store.next_trial(&id).unwrap_err().code(), "lifecycle");
    assert_eq!(store.report(&id).unwrap(), report);
    assert_eq!(store.state(&id).unwrap().phase, Phase::Closed);
}

#[test]
fn abort_after_ten_trials() {
    let (_d, store) = store();
    let id = store.create(&request("P01", 9)).unwrap().session_id;
    store.start(&id, None).unwrap();
    for _ in 0..10 {
        let t = serve(&store, &id);
        store.record_response(&id, &TrialResponse::no_report(t.trial.index)).unwrap();
    }
    serve(&store, &id);
    store.abort(&id).unwrap();
    assert_eq!(store.abort(&id).unwrap_err().code(), "lifecycle");
    let report = store.finalize(&id).unwrap();
    assert!(report.aborted);
    assert_eq!(report.trials_responded, 10);
    let presented: u32 = report.per_category.values().map(|t| t.presented).sum();
    assert_eq!(presented, 10);
    assert!(report.partition_warning.is_none());
}

#[test]
fn table1_row1_through_the_engine() {
    let (_d, store) = store();
    let f = common::row1();
    let mut r = CreateSession::new("P01");
    r.seed = Some(11);
    r.stated_goals = f.stated.clone();
    r.goal_words = Some(f.linked.iter().map(|w| w.to_string()).collect());
    let id = store.create(&r).unwrap().session_id;
    store.start(&id, Some(60.0)).unwrap();
    let plan = store.state(&id).unwrap().transcript.plan;
    let outcomes = common::fixture_outcomes(&f, &plan.trials);
    for (seen, invalid) in outcomes {
        let t = serve(&store, &id);
        let off = if invalid { 3 } else { 0 };
        let v = store
            .record_telemetry(&id, None, &common::telemetry(t.trial.index, t.stimulus.frames, off))
            .unwrap();
        assert_eq!(v, if invalid { Verdict::Invalid } else { Verdict::Ok });
        let resp = if seen {
            TrialResponse::word(t.trial.index, &t.trial.word, Default::default())
        } else {
            TrialResponse::no_report(t.trial.index)
        };
        store.record_response(&id, &resp).unwrap();
    }
    let report = store.finalize(&id).unwrap();
    assert_eq!(report.table1.columns(), [9, 14, 2, 8, 3, 2]);
    assert_eq!(report.excluded_trials, 2);
    assert_eq!(
        report.table1,
        Table1Row {
            seen_stated: 9,
            seen_unstated: 14,
            notseen_stated: 2,
            notseen_other: 8,
            controls_seen: 3,
            goals_mentioned: 2,
            controls_not_seen: 2,
        }
    );
}

#[test]
fn telemetry_rules() {
    let (_d, store) = store();
    let id = store.create(&request("P01", 12)).unwrap().session_id;
    store.start(&id, None).unwrap();
    let tel = common::telemetry(0, 3, 0);
    assert_eq!(store.record_telemetry(&id, None, &tel).unwrap_err().code(), "protocol");
    serve(&store, &id);
    assert_eq!(store.record_telemetry(&id, None, &tel).unwrap(), Verdict::Ok);
    assert_eq!(store.record_telemetry(&id, None, &tel).unwrap_err().code(), "sequencing");
    // a late report for an answered trial still lands on that trial
    store.record_response(&id, &TrialResponse::no_report(0)).unwrap();
    serve(&store, &id);
    store.record_response(&id, &TrialResponse::no_report(1)).unwrap();
    store.record_telemetry(&id, None, &common::telemetry(1, 3, 1)).unwrap();
    let s = store.state(&id).unwrap();
    assert_eq!(s.transcript.responses[1].telemetry_verdict, Verdict::Degraded);
    assert_eq!(
        store.record_telemetry(&id, Some(Block::Preblock), &tel).unwrap_err().code(),
        "protocol"
    );
}

#[test]
fn client_cannot_set_verdict() {
    let (_d, store) = store();
    let id = store.create(&request("P01", 13)).unwrap().session_id;
    store.start(&id, None).unwrap();
    serve(&store, &id);
    let mut r = TrialResponse::no_report(0);
    r.telemetry_verdict = Verdict::Invalid;
    store.record_response(&id, &r).unwrap();
    assert_eq!(store.state(&id).unwrap().transcript.responses[0].telemetry_verdict, Verdict::Ok);
}

#[test]
fn reopen_replays_everything() {
    let dir = tempfile::tempdir().unwrap();
    let ids: Vec<String> = {
        let store = SessionStore::open_with(dir.path(), Durability::Sync).unwrap();
        (0..3).map(|i| common::drive_simulated(&store, &format!("R{i}"), 40 + i)).collect()
    };
    let store = SessionStore::open(dir.path()).unwrap();
    assert_eq!(store.list().unwrap().len(), 3);
    for id in &ids {
        let records = read_log(&store.log_path(id)).unwrap().records;
        assert_eq!(store.state(id).unwrap(), replay(&records).unwrap());
        assert!(store.report(id).is_ok());
        // seq strictly increasing from 1
        assert!(records.iter().enumerate().all(|(i, r)| r.seq == i as u64 + 1));
    }
}

#[test]
fn unknown_session() {
    let (_d, store) = store();
    assert_eq!(store.next_trial("nope").unwrap_err().code(), "not_found");
}

#[test]
fn persisted_files_carry_only_the_pid() {
    let (d, store) = store();
    let mut r = request("P77", 14);
    r.notes = "prefers breaks".into();
    let id = store.create(&r).unwrap().session_id;
    store.start(&id, None).unwrap();
    for entry in fs::read_dir(d.path()).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        assert!(!text.contains('@'));
        assert!(text.contains("P77"));
    }
}
