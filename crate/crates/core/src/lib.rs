//! Core algorithms for masked goal-word tachistoscopic sessions: stimulus
//! lexicon balancing, trial scheduling, frame timing, response scoring,
//! per-participant analysis, duration calibration, a simulated participant
//! and the event-sourced session engine.

pub mod analysis;
pub mod calibration;
pub mod config;
pub mod lexicon;
pub mod privacy;
pub mod scheduler;
pub mod scoring;
pub mod session;
pub mod simulant;
pub mod timing;

pub use analysis::{
    build_report, category_stats, render_text, table1_row, AnalysisOptions, ParticipantProfile,
    SensitivityReport, SessionTranscript, Table1Row,
};
pub use calibration::{next_duration, CalibrationPolicy, CalibrationState};
pub use config::SessionConfig;
pub use lexicon::{
    balance_select, validate_set, BalanceReport, FrequencyCorpus, GoalCategory, LexiconEntry,
    StimulusSet, Tolerances,
};
pub use scheduler::{build_schedule, mask_for, TrialPlan, TrialSpec};
pub use scoring::{classify, Classification, Confidence, Kind, TrialResponse};
pub use session::{CreateSession, SessionError, SessionState, SessionStore};
pub use simulant::{recovery_rate, simulate_session, SimulantParams};
pub use timing::{quantize, verify_telemetry, DisplayProfile, QuantizedDuration, TrialTelemetry, Verdict};
