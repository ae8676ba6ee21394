//! Session state, the commands that produce events, and the fold that
//! applies them. Commands only validate and emit; every mutation goes
//! through [`SessionState::apply`], so replaying a log rebuilds the state.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::events::*;
use super::SessionError;
use crate::analysis::{
    build_report, is_seen, AnalysisOptions, ParticipantProfile, ReportContext, SensitivityReport,
    SessionTranscript,
};
use crate::calibration::{next_duration, CalibrationState};
use crate::config::SessionConfig;
use crate::lexicon::StimulusSet;
use crate::privacy::check_free_text;
use crate::scheduler::{Block, TrialSpec};
use crate::scoring::{classify, Classification, TrialResponse};
use crate::timing::{quantize, verify_telemetry, DisplayProfile, TrialTelemetry, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryEntry {
    pub block: Block,
    pub telemetry: TrialTelemetry,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub pid: String,
    pub created_at: DateTime<Utc>,
    pub last_seq: u64,
    pub phase: Phase,
    /// Next trial index within the current block.
    pub cursor: usize,
    pub seed: u64,
    pub session_ordinal: u32,
    pub config: SessionConfig,
    pub set: StimulusSet,
    pub profile: ParticipantProfile,
    /// Main block: its plan plus the responses so far.
    pub transcript: SessionTranscript,
    pub preblock: Option<SessionTranscript>,
    pub calibration: CalibrationState,
    pub calibration_log: Vec<CalibrationChange>,
    pub refresh_hz: f64,
    pub consent_confirmed: bool,
    /// The trial at `cursor` once it has been served.
    pub served: Option<ServedTrial>,
    pub telemetry: Vec<TelemetryEntry>,
    pub recalled: Option<Vec<String>>,
    pub aborted: bool,
    pub report: Option<SensitivityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTrial {
    Trial(ServedTrial),
    PhaseAdvance { phase: Phase },
}

impl SessionState {
    pub fn from_created(rec: &EventRecord) -> Result<Self, SessionError> {
        let Event::SessionCreated(c) = &rec.event else {
            return Err(SessionError::Corrupt("log does not start with session_created".into()));
        };
        if rec.seq != 1 {
            return Err(SessionError::Corrupt(format!("first event has seq {}", rec.seq)));
        }
        let c = c.as_ref().clone();
        let transcript = SessionTranscript::new(c.main_plan, c.pid.clone());
        Ok(SessionState {
            session_id: c.session_id,
            pid: c.pid.clone(),
            created_at: rec.timestamp,
            last_seq: 1,
            phase: Phase::Created,
            cursor: 0,
            seed: c.seed,
            session_ordinal: c.session_ordinal,
            refresh_hz: c.config.refresh_hz,
            config: c.config,
            set: c.set,
            profile: c.profile,
            transcript,
            preblock: c.preblock_plan.map(|p| SessionTranscript::new(p, c.pid)),
            calibration: CalibrationState::default(),
            calibration_log: Vec::new(),
            consent_confirmed: false,
            served: None,
            telemetry: Vec::new(),
            recalled: None,
            aborted: false,
            report: None,
        })
    }

    pub fn current_block(&self) -> Block {
        if self.phase == Phase::Preblock {
            Block::Preblock
        } else {
            Block::Main
        }
    }

    pub fn block(&self, block: Block) -> Option<&SessionTranscript> {
        match block {
            Block::Main => Some(&self.transcript),
            Block::Preblock => self.preblock.as_ref(),
        }
    }

    fn block_mut(&mut self, block: Block) -> Result<&mut SessionTranscript, SessionError> {
        match block {
            Block::Main => Ok(&mut self.transcript),
            Block::Preblock => self
                .preblock
                .as_mut()
                .ok_or_else(|| SessionError::Corrupt("event for missing pre-block".into())),
        }
    }

    fn profile_hz(&self) -> Result<DisplayProfile, SessionError> {
        DisplayProfile::new(self.refresh_hz).map_err(|e| SessionError::Internal(e.to_string()))
    }

    fn served_for(&self, block: Block, trial: &TrialSpec) -> Result<ServedTrial, SessionError> {
        let profile = self.profile_hz()?;
        let q = |ms| quantize(ms, profile).map_err(|e| SessionError::Internal(e.to_string()));
        Ok(ServedTrial {
            block,
            trial: trial.clone(),
            refresh_hz: self.refresh_hz,
            stimulus: q(trial.stimulus_ms)?,
            mask: if trial.mask_enabled { Some(q(trial.mask_ms)?) } else { None },
        })
    }

    fn history(&self, block: Block) -> Vec<(TrialSpec, TrialResponse)> {
        self.block(block)
            .map(|t| {
                t.plan
                    .trials
                    .iter()
                    .cloned()
                    .zip(t.responses.iter().cloned())
                    .collect()
            })
            .unwrap_or_default()
    }

    fn lifecycle_guard(&self) -> Result<(), SessionError> {
        if self.phase == Phase::Closed {
            return Err(SessionError::Lifecycle("session is closed".into()));
        }
        Ok(())
    }

    // ---- commands -------------------------------------------------------

    pub fn cmd_start(&self, refresh_hz: Option<f64>) -> Result<Vec<Event>, SessionError> {
        self.lifecycle_guard()?;
        if self.phase != Phase::Created {
            return Err(SessionError::Lifecycle("session already started".into()));
        }
        let hz = refresh_hz.unwrap_or(self.refresh_hz);
        DisplayProfile::new(hz).map_err(|e| SessionError::Structural(e.to_string()))?;
        let to = if self.preblock.is_some() { Phase::Preblock } else { Phase::Running };
        let mut ev = PhaseChanged::new(Phase::Created, to);
        ev.consent_confirmed = Some(true);
        ev.refresh_hz = Some(hz);
        Ok(vec![Event::PhaseChanged(ev)])
    }

    pub fn cmd_next_trial(&self) -> Result<(Vec<Event>, NextTrial), SessionError> {
        self.lifecycle_guard()?;
        match self.phase {
            Phase::Created => Err(SessionError::Lifecycle("session not started".into())),
            Phase::MemoryProbe | Phase::Debrief => {
                Ok((vec![], NextTrial::PhaseAdvance { phase: self.phase }))
            }
            _ => {
                if let Some(s) = &self.served {
                    return Ok((vec![], NextTrial::Trial(s.clone())));
                }
                let block = self.current_block();
                let t = self.block(block).expect("current block exists");
                if t.responses.len() != self.cursor {
                    return Err(SessionError::Sequencing(format!(
                        "response for trial {} missing",
                        t.responses.len()
                    )));
                }
                let trial = t.plan.trials.get(self.cursor).ok_or_else(|| {
                    SessionError::Internal("cursor past end of serving block".into())
                })?;
                let served = self.served_for(block, trial)?;
                Ok((vec![Event::TrialServed(served.clone())], NextTrial::Trial(served)))
            }
        }
    }

    pub fn cmd_record_response(
        &self,
        response: &TrialResponse,
    ) -> Result<(Vec<Event>, Classification), SessionError> {
        self.lifecycle_guard()?;
        if !self.phase.serves_trials() {
            return Err(SessionError::Sequencing(format!(
                "no trial awaiting a response in phase {:?}",
                self.phase
            )));
        }
        if response.trial_index != self.cursor {
            return Err(SessionError::Sequencing(format!(
                "response for trial {} but trial {} is current",
                response.trial_index, self.cursor
            )));
        }
        let Some(served) = &self.served else {
            return Err(SessionError::Sequencing(format!(
                "trial {} has not been served",
                self.cursor
            )));
        };
        check_free_text("note", &response.note)?;
        if let Some(r) = &response.reported {
            check_free_text("reported", r)?;
        }
        let block = served.block;
        // the verdict is owned by the engine, not the client
        let mut response = response.clone();
        response.telemetry_verdict = self
            .telemetry
            .iter()
            .find(|t| t.block == block && t.telemetry.trial_index == response.trial_index)
            .map(|t| t.verdict)
            .unwrap_or_default();
        let history = self.history(block);
        let classification = classify(&response, &served.trial, &history)?;
        let mut events = vec![Event::ResponseRecorded(ResponseRecorded {
            block,
            response: response.clone(),
            classification: classification.clone(),
        })];

        let t = self.block(block).expect("block exists");
        if self.cursor + 1 == t.plan.len() {
            events.push(match block {
                Block::Preblock => Event::PhaseChanged(self.calibrate_after_preblock(&response, &classification)?),
                Block::Main => {
                    let to = if self.config.memory_probe { Phase::MemoryProbe } else { Phase::Debrief };
                    Event::PhaseChanged(PhaseChanged::new(Phase::Running, to))
                }
            });
        }
        Ok((events, classification))
    }

    fn calibrate_after_preblock(
        &self,
        last: &TrialResponse,
        last_class: &Classification,
    ) -> Result<PhaseChanged, SessionError> {
        let pre = self.preblock.as_ref().expect("pre-block phase has a pre-block");
        let opts = AnalysisOptions {
            include_partials: self.config.include_partials,
            exclude_invalid: self.config.exclude_invalid,
        };
        let counted = pre
            .responses
            .iter()
            .zip(&pre.classifications)
            .chain(std::iter::once((last, last_class)))
            .filter(|(r, _)| !(opts.exclude_invalid && r.telemetry_verdict == Verdict::Invalid));
        let (mut hits, mut trials) = (0u32, 0u32);
        for (_, c) in counted {
            trials += 1;
            if is_seen(c, opts.include_partials) {
                hits += 1;
            }
        }
        let (state, decision) = next_duration(&self.calibration, hits, trials, &self.config.policy)
            .map_err(|e| SessionError::Structural(e.to_string()))?;
        let stimulus = quantize(decision.duration_ms, self.profile_hz()?)
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        let mut ev = PhaseChanged::new(Phase::Preblock, Phase::Running);
        ev.calibration = Some(CalibrationChange {
            hits,
            trials,
            state,
            decision,
            stimulus,
        });
        Ok(ev)
    }

    pub fn cmd_record_telemetry(
        &self,
        block: Option<Block>,
        telemetry: &TrialTelemetry,
    ) -> Result<(Vec<Event>, Verdict), SessionError> {
        self.lifecycle_guard()?;
        if self.phase == Phase::Created {
            return Err(SessionError::Lifecycle("session not started".into()));
        }
        let block = block.unwrap_or(self.current_block());
        let t = self
            .block(block)
            .ok_or_else(|| SessionError::Protocol("session has no pre-block".into()))?;
        let idx = telemetry.trial_index;
        let in_current = self.phase.serves_trials() && block == self.current_block();
        let served_now = in_current && idx == self.cursor && self.served.is_some();
        if idx >= t.plan.len() || !(idx < t.responses.len() || served_now) {
            return Err(SessionError::Protocol(format!("trial {idx} has not been presented")));
        }
        if self
            .telemetry
            .iter()
            .any(|e| e.block == block && e.telemetry.trial_index == idx)
        {
            return Err(SessionError::Sequencing(format!("telemetry for trial {idx} already recorded")));
        }
        let trial = &t.plan.trials[idx];
        let planned = self.served_for(block, trial)?;
        let verdict = verify_telemetry(trial, &planned.stimulus, telemetry, self.config.slack_frames)
            .map_err(|e| SessionError::Protocol(e.to_string()))?;
        Ok((
            vec![Event::TelemetryRecorded(TelemetryRecorded {
                block,
                telemetry: telemetry.clone(),
                verdict,
            })],
            verdict,
        ))
    }

    pub fn cmd_submit_recall(&self, words: &[String]) -> Result<Vec<Event>, SessionError> {
        self.lifecycle_guard()?;
        if self.phase != Phase::MemoryProbe {
            return Err(SessionError::Sequencing("memory probe is not open".into()));
        }
        for w in words {
            check_free_text("recalled", w)?;
        }
        let mut ev = PhaseChanged::new(Phase::MemoryProbe, Phase::Debrief);
        ev.recalled = Some(words.to_vec());
        Ok(vec![Event::PhaseChanged(ev)])
    }

    pub fn cmd_abort(&self) -> Result<Vec<Event>, SessionError> {
        self.lifecycle_guard()?;
        if self.phase == Phase::Debrief {
            return Err(SessionError::Lifecycle("session already finished presenting".into()));
        }
        let mut ev = PhaseChanged::new(self.phase, Phase::Debrief);
        ev.aborted = true;
        Ok(vec![Event::PhaseChanged(ev)])
    }

    pub fn cmd_finalize(&self) -> Result<(Vec<Event>, SensitivityReport), SessionError> {
        if self.phase == Phase::Closed {
            return Err(SessionError::Lifecycle("session already finalized".into()));
        }
        if !matches!(self.phase, Phase::Debrief | Phase::MemoryProbe) {
            return Err(SessionError::Sequencing(
                "trials remain; abort the session to finalize early".into(),
            ));
        }
        let opts = AnalysisOptions {
            include_partials: self.config.include_partials,
            exclude_invalid: self.config.exclude_invalid,
        };
        let report = build_report(
            &self.transcript,
            &self.profile,
            opts,
            ReportContext {
                aborted: self.aborted,
                session_ordinal: self.session_ordinal,
                recalled: self.recalled.as_deref(),
            },
        )?;
        Ok((
            vec![
                Event::ReportGenerated(Box::new(report.clone())),
                Event::PhaseChanged(PhaseChanged::new(self.phase, Phase::Closed)),
            ],
            report,
        ))
    }

    // ---- fold -----------------------------------------------------------

    pub fn apply(&mut self, rec: &EventRecord) -> Result<(), SessionError> {
        if rec.seq != self.last_seq + 1 {
            return Err(SessionError::Corrupt(format!(
                "expected seq {}, found {}",
                self.last_seq + 1,
                rec.seq
            )));
        }
        match &rec.event {
            Event::SessionCreated(_) => {
                return Err(SessionError::Corrupt("second session_created event".into()))
            }
            Event::TrialServed(s) => {
                if !self.phase.serves_trials() || s.trial.index != self.cursor {
                    return Err(SessionError::Corrupt("trial served out of order".into()));
                }
                self.served = Some(s.clone());
            }
            Event::ResponseRecorded(r) => {
                if r.response.trial_index != self.cursor {
                    return Err(SessionError::Corrupt("response out of order".into()));
                }
                let t = self.block_mut(r.block)?;
                t.responses.push(r.response.clone());
                t.classifications.push(r.classification.clone());
                self.cursor += 1;
                self.served = None;
            }
            Event::TelemetryRecorded(e) => {
                let idx = e.telemetry.trial_index;
                let t = self.block_mut(e.block)?;
                if let Some(resp) = t.responses.get_mut(idx) {
                    resp.telemetry_verdict = e.verdict;
                }
                self.telemetry.push(TelemetryEntry {
                    block: e.block,
                    telemetry: e.telemetry.clone(),
                    verdict: e.verdict,
                });
            }
            Event::PhaseChanged(p) => {
                if p.from != self.phase || p.to <= p.from {
                    return Err(SessionError::Corrupt(format!(
                        "phase change {:?} -> {:?} from {:?}",
                        p.from, p.to, self.phase
                    )));
                }
                if let Some(c) = p.consent_confirmed {
                    self.consent_confirmed = c;
                }
                if let Some(hz) = p.refresh_hz {
                    self.refresh_hz = hz;
                }
                if let Some(c) = &p.calibration {
                    self.calibration = c.state.clone();
                    for t in &mut self.transcript.plan.trials {
                        t.stimulus_ms = c.decision.duration_ms;
                    }
                    self.calibration_log.push(c.clone());
                }
                if p.aborted {
                    self.aborted = true;
                }
                if let Some(r) = &p.recalled {
                    self.recalled = Some(r.clone());
                }
                if p.from == Phase::Preblock {
                    self.cursor = 0;
                }
                self.served = None;
                self.phase = p.to;
            }
            Event::ReportGenerated(r) => {
                self.report = Some(r.as_ref().clone());
            }
        }
        self.last_seq = rec.seq;
        Ok(())
    }

    /// Words of the main set's neutral category, for pre-block exclusion.
    pub fn main_neutral_words(set: &StimulusSet) -> Vec<String> {
        set.words_in(crate::lexicon::GoalCategory::Neutral)
            .map(|e| e.word.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Rebuilds a session by folding its event log.
pub fn replay(records: &[EventRecord]) -> Result<SessionState, SessionError> {
    let (first, rest) = records
        .split_first()
        .ok_or_else(|| SessionError::Corrupt("empty event log".into()))?;
    let mut state = SessionState::from_created(first)?;
    for rec in rest {
        state.apply(rec)?;
    }
    Ok(state)
}
