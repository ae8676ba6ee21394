use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::Utc;

use super::events::{Event, EventRecord};
use super::log::{read_log, write_snapshot, Durability, EventLog};
use super::state::{replay, NextTrial, SessionState};
use super::{CreateSession, SessionError};
use crate::analysis::SensitivityReport;
use crate::scheduler::Block;
use crate::scoring::{Classification, TrialResponse};
use crate::timing::{TrialTelemetry, Verdict};

struct Live {
    state: SessionState,
    log: EventLog,
}

type Handle = Arc<Mutex<Live>>;

/// Directory-backed set of sessions.
///
/// Commands on one session are serialized by its mutex; distinct sessions
/// proceed independently.
pub struct SessionStore {
    dir: PathBuf,
    durability: Durability,
    sessions: RwLock<BTreeMap<String, Handle>>,
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, SessionError> {
        Self::open_with(dir, Durability::default())
    }

    /// Opens the directory, replaying every `<id>.log` found there.
    pub fn open_with(dir: impl Into<PathBuf>, durability: Durability) -> Result<Self, SessionError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = BTreeMap::new();
        let mut paths: Vec<_> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "log"))
            .collect();
        paths.sort();
        for path in paths {
            let loaded = read_log(&path)?;
            if loaded.records.is_empty() {
                // creation crashed before its first event landed
                fs::remove_file(&path)?;
                continue;
            }
            let state = replay(&loaded.records)?;
            let expected = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if state.session_id != expected {
                return Err(SessionError::Corrupt(format!(
                    "{} holds session {}",
                    path.display(),
                    state.session_id
                )));
            }
            write_snapshot(&snapshot_path(&dir, &state.session_id), &state)?;
            let log = EventLog::open(&path, durability)?;
            sessions.insert(state.session_id.clone(), Arc::new(Mutex::new(Live { state, log })));
        }
        Ok(SessionStore {
            dir,
            durability,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.log"))
    }

    pub fn snapshot_path(&self, id: &str) -> PathBuf {
        snapshot_path(&self.dir, id)
    }

    pub fn create(&self, req: &CreateSession) -> Result<SessionState, SessionError> {
        let mut map = self.sessions.write().map_err(poisoned)?;
        let seed = req.seed.unwrap_or_else(rand::random);
        let prior: Vec<_> = map
            .values()
            .filter_map(|h| h.lock().ok())
            .filter(|l| l.state.pid == req.pid)
            .map(|l| l.state.seed)
            .collect();
        if prior.contains(&seed) {
            return Err(SessionError::Structural(format!(
                "seed {seed} was already used for this participant; reruns need a fresh seed"
            )));
        }
        let ordinal = req.session_ordinal.unwrap_or(prior.len() as u32 + 1);
        let id = format!("s{}", uuid::Uuid::new_v4().simple());
        let created = req.build(id.clone(), seed, ordinal)?;

        let rec = EventRecord {
            seq: 1,
            timestamp: Utc::now(),
            event: Event::SessionCreated(Box::new(created)),
        };
        let state = SessionState::from_created(&rec)?;
        let path = self.log_path(&id);
        let mut log = EventLog::create(&path, self.durability).map_err(|e| {
            SessionError::Internal(format!("cannot create log {}: {e}", path.display()))
        })?;
        log.append(std::slice::from_ref(&rec))?;
        write_snapshot(&self.snapshot_path(&id), &state)?;
        map.insert(id, Arc::new(Mutex::new(Live { state: state.clone(), log })));
        Ok(state)
    }

    fn handle(&self, id: &str) -> Result<Handle, SessionError> {
        self.sessions
            .read()
            .map_err(poisoned)?
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    /// Runs a command under the session lock, then persists and applies
    /// whatever events it produced.
    fn run<T>(
        &self,
        id: &str,
        cmd: impl FnOnce(&SessionState) -> Result<(Vec<Event>, T), SessionError>,
    ) -> Result<T, SessionError> {
        let handle = self.handle(id)?;
        let mut live = handle.lock().map_err(poisoned)?;
        let (events, out) = cmd(&live.state)?;
        if events.is_empty() {
            return Ok(out);
        }
        let now = Utc::now();
        let mut next = live.state.clone();
        let mut records = Vec::with_capacity(events.len());
        for event in events {
            let rec = EventRecord {
                seq: next.last_seq + 1,
                timestamp: now,
                event,
            };
            next.apply(&rec)?;
            records.push(rec);
        }
        live.log.append(&records)?;
        live.state = next;
        write_snapshot(&self.snapshot_path(id), &live.state)?;
        Ok(out)
    }

    pub fn start(&self, id: &str, refresh_hz: Option<f64>) -> Result<SessionState, SessionError> {
        self.run(id, |s| Ok((s.cmd_start(refresh_hz)?, ())))?;
        self.state(id)
    }

    pub fn next_trial(&self, id: &str) -> Result<NextTrial, SessionError> {
        self.run(id, |s| s.cmd_next_trial())
    }

    pub fn record_response(&self, id: &str, r: &TrialResponse) -> Result<Classification, SessionError> {
        self.run(id, |s| s.cmd_record_response(r))
    }

    pub fn record_telemetry(
        &self,
        id: &str,
        block: Option<Block>,
        t: &TrialTelemetry,
    ) -> Result<Verdict, SessionError> {
        self.run(id, |s| s.cmd_record_telemetry(block, t))
    }

    pub fn submit_recall(&self, id: &str, words: &[String]) -> Result<SessionState, SessionError> {
        self.run(id, |s| Ok((s.cmd_submit_recall(words)?, ())))?;
        self.state(id)
    }

    pub fn abort(&self, id: &str) -> Result<SessionState, SessionError> {
        self.run(id, |s| Ok((s.cmd_abort()?, ())))?;
        self.state(id)
    }

    pub fn finalize(&self, id: &str) -> Result<SensitivityReport, SessionError> {
        self.run(id, |s| s.cmd_finalize())
    }

    /// The stored report of a finalized session.
    pub fn report(&self, id: &str) -> Result<SensitivityReport, SessionError> {
        self.state(id)?
            .report
            .ok_or_else(|| SessionError::Lifecycle(format!("session {id} has not been finalized")))
    }

    pub fn state(&self, id: &str) -> Result<SessionState, SessionError> {
        let handle = self.handle(id)?;
        let live = handle.lock().map_err(poisoned)?;
        Ok(live.state.clone())
    }

    pub fn list(&self) -> Result<Vec<SessionState>, SessionError> {
        let handles: Vec<Handle> = self.sessions.read().map_err(poisoned)?.values().cloned().collect();
        handles
            .iter()
            .map(|h| Ok(h.lock().map_err(poisoned)?.state.clone()))
            .collect()
    }
}

fn snapshot_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.snapshot.json"))
}

fn poisoned<T>(_: T) -> SessionError {
    SessionError::Internal("session lock poisoned".into())
}
