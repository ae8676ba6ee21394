//! Event-sourced session engine.
//!
//! Each session is an append-only JSONL event log; the in-memory state and
//! the snapshot file are both derived by folding that log.

mod events;
mod log;
mod state;
mod store;

use serde::{Deserialize, Serialize};

pub use events::*;
pub use log::{read_log, Durability, EventLog, LoadedLog};
pub use state::{replay, NextTrial, SessionState, TelemetryEntry};
pub use store::SessionStore;

use crate::analysis::{AnalysisError, ParticipantProfile};
use crate::calibration::{build_preblock, CalibrationError};
use crate::config::SessionConfig;
use crate::lexicon::{
    default_neutral_pool, default_set, GoalCategory, LexiconEntry, LexiconError, StimulusSet,
    Tolerances,
};
use crate::privacy::{check_free_text, check_pid, PrivacyError};
use crate::scheduler::{build_schedule, ScheduleError};
use crate::scoring::ScoringError;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("session '{0}' not found")]
    NotFound(String),
    #[error("{0}")]
    Structural(String),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error("{0}")]
    Sequencing(String),
    #[error("{0}")]
    Lifecycle(String),
    #[error("{0}")]
    Protocol(String),
    #[error("corrupt event log: {0}")]
    Corrupt(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Internal(String),
}

impl SessionError {
    /// Stable machine-readable code for API clients.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::NotFound(_) => "not_found",
            SessionError::Structural(_) => "structural",
            SessionError::Privacy(_) => "privacy",
            SessionError::Sequencing(_) => "sequencing",
            SessionError::Lifecycle(_) => "lifecycle",
            SessionError::Protocol(_) => "protocol",
            SessionError::Corrupt(_) | SessionError::Io(_) | SessionError::Internal(_) => "internal",
        }
    }
}

impl From<ScoringError> for SessionError {
    fn from(e: ScoringError) -> Self {
        SessionError::Protocol(e.to_string())
    }
}

impl From<AnalysisError> for SessionError {
    fn from(e: AnalysisError) -> Self {
        SessionError::Structural(e.to_string())
    }
}

impl From<LexiconError> for SessionError {
    fn from(e: LexiconError) -> Self {
        SessionError::Structural(e.to_string())
    }
}

impl From<ScheduleError> for SessionError {
    fn from(e: ScheduleError) -> Self {
        SessionError::Structural(e.to_string())
    }
}

impl From<CalibrationError> for SessionError {
    fn from(e: CalibrationError) -> Self {
        SessionError::Structural(e.to_string())
    }
}

/// Request to open a new session.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CreateSession {
    pub pid: String,
    pub config: SessionConfig,
    /// Drawn at random when absent.
    pub seed: Option<u64>,
    pub stated_goals: Vec<GoalCategory>,
    pub goal_words: Option<Vec<String>>,
    pub notes: String,
    /// A full 8 × 5 stimulus set; the built-in one when absent.
    pub lexicon: Option<Vec<LexiconEntry>>,
    pub neutral_pool: Option<Vec<LexiconEntry>>,
    /// Defaults to one more than the participant's existing sessions.
    pub session_ordinal: Option<u32>,
}

impl CreateSession {
    pub fn new(pid: impl Into<String>) -> Self {
        CreateSession {
            pid: pid.into(),
            ..Default::default()
        }
    }

    /// Validates the request and builds the opening event.
    pub fn build(
        &self,
        session_id: String,
        seed: u64,
        session_ordinal: u32,
    ) -> Result<SessionCreated, SessionError> {
        check_pid(&self.pid)?;
        check_free_text("notes", &self.notes)?;
        check_free_text("viewing_distance_note", &self.config.viewing_distance_note)?;
        self.config.validate().map_err(SessionError::Structural)?;
        self.config.policy.validate()?;

        let set = match &self.lexicon {
            Some(entries) => {
                let set = StimulusSet::from_entries(entries.clone(), Tolerances::default())?;
                set.check_design()?;
                set
            }
            None => default_set(),
        };
        let mut profile = ParticipantProfile::new(self.pid.clone(), self.stated_goals.iter().copied());
        profile.notes = self.notes.clone();
        if let Some(words) = &self.goal_words {
            for w in words {
                if set.entry(w).is_none() {
                    return Err(SessionError::Structural(format!(
                        "goal word '{w}' is not in the stimulus set"
                    )));
                }
            }
            profile.goal_words = Some(words.iter().cloned().collect());
        }
        profile.validate()?;

        let main_plan = build_schedule(&set, &self.config, seed)?;
        let preblock_plan = if self.config.preblock {
            let pool = self.neutral_pool.clone().unwrap_or_else(default_neutral_pool);
            let avoid = SessionState::main_neutral_words(&set);
            Some(build_preblock(&pool, &self.config, seed, &avoid)?)
        } else {
            None
        };
        Ok(SessionCreated {
            session_id,
            pid: self.pid.clone(),
            seed,
            session_ordinal,
            config: self.config.clone(),
            set,
            profile,
            main_plan,
            preblock_plan,
        })
    }
}
