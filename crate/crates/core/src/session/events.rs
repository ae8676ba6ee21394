use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::analysis::{ParticipantProfile, SensitivityReport};
use crate::calibration::{CalibrationState, Decision};
use crate::config::SessionConfig;
use crate::lexicon::StimulusSet;
use crate::scheduler::{Block, TrialPlan, TrialSpec};
use crate::scoring::{Classification, TrialResponse};
use crate::timing::{QuantizedDuration, TrialTelemetry, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Created,
    Preblock,
    Running,
    MemoryProbe,
    Debrief,
    Closed,
}

impl Phase {
    pub fn serves_trials(self) -> bool {
        matches!(self, Phase::Preblock | Phase::Running)
    }
}

/// What the display needs to render one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServedTrial {
    pub block: Block,
    pub trial: TrialSpec,
    pub refresh_hz: f64,
    pub stimulus: QuantizedDuration,
    pub mask: Option<QuantizedDuration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub pid: String,
    pub seed: u64,
    pub session_ordinal: u32,
    pub config: SessionConfig,
    pub set: StimulusSet,
    pub profile: ParticipantProfile,
    pub main_plan: TrialPlan,
    pub preblock_plan: Option<TrialPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecorded {
    pub block: Block,
    pub response: TrialResponse,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecorded {
    pub block: Block,
    pub telemetry: TrialTelemetry,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationChange {
    pub hits: u32,
    pub trials: u32,
    pub state: CalibrationState,
    pub decision: Decision,
    /// Main-block stimulus duration after the decision, quantized at the
    /// session's refresh rate.
    pub stimulus: QuantizedDuration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseChanged {
    pub from: Phase,
    pub to: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consent_confirmed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refresh_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationChange>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub aborted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recalled: Option<Vec<String>>,
}

impl PhaseChanged {
    pub fn new(from: Phase, to: Phase) -> Self {
        PhaseChanged {
            from,
            to,
            consent_confirmed: None,
            refresh_hz: None,
            calibration: None,
            aborted: false,
            recalled: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    SessionCreated(Box<SessionCreated>),
    TrialServed(ServedTrial),
    ResponseRecorded(ResponseRecorded),
    TelemetryRecorded(TelemetryRecorded),
    PhaseChanged(PhaseChanged),
    ReportGenerated(Box<SensitivityReport>),
}

/// One line of a session's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub event: Event,
}
