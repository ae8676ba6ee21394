//! Frame quantization of requested durations and verification of what the
//! display reports it actually showed.

use serde::{Deserialize, Serialize};

use crate::scheduler::TrialSpec;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TimingError {
    #[error("refresh rate {0} Hz outside [20, 500]")]
    RefreshRate(f64),
    #[error("duration must be positive, got {0} ms")]
    NonPositive(f64),
    #[error("telemetry for trial {got} does not match planned trial {expected}")]
    TrialMismatch { expected: usize, got: usize },
    #[error("negative telemetry span")]
    NegativeSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayProfile {
    refresh_hz: f64,
}

impl DisplayProfile {
    pub fn new(refresh_hz: f64) -> Result<Self, TimingError> {
        if !(20.0..=500.0).contains(&refresh_hz) {
            return Err(TimingError::RefreshRate(refresh_hz));
        }
        Ok(DisplayProfile { refresh_hz })
    }

    pub fn refresh_hz(&self) -> f64 {
        self.refresh_hz
    }

    pub fn frame_ms(&self) -> f64 {
        1000.0 / self.refresh_hz
    }

    pub fn frames_to_ms(&self, frames: u32) -> f64 {
        frames as f64 * 1000.0 / self.refresh_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizedDuration {
    pub requested_ms: f64,
    pub frames: u32,
    pub achieved_ms: f64,
}

/// Nearest whole number of frames, ties rounding up, never fewer than one.
pub fn quantize(requested_ms: f64, profile: DisplayProfile) -> Result<QuantizedDuration, TimingError> {
    if !(requested_ms.is_finite() && requested_ms > 0.0) {
        return Err(TimingError::NonPositive(requested_ms));
    }
    // requested * hz / 1000 rather than requested / frame_ms keeps
    // integer-frame cases like 50 ms at 60 Hz exact
    let exact = requested_ms * profile.refresh_hz / 1000.0;
    let frames = ((exact + 0.5).floor() as u32).max(1);
    Ok(QuantizedDuration {
        requested_ms,
        frames,
        achieved_ms: profile.frames_to_ms(frames),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTelemetry {
    pub trial_index: usize,
    pub stimulus_frames_shown: u32,
    pub stimulus_span_ms: f64,
    pub mask_span_ms: f64,
    pub dropped_frames: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    #[default]
    Ok,
    Degraded,
    Invalid,
}

pub fn verify_telemetry(
    plan_trial: &TrialSpec,
    q: &QuantizedDuration,
    t: &TrialTelemetry,
    slack_frames: u32,
) -> Result<Verdict, TimingError> {
    if plan_trial.index != t.trial_index {
        return Err(TimingError::TrialMismatch {
            expected: plan_trial.index,
            got: t.trial_index,
        });
    }
    if t.stimulus_span_ms < 0.0 || t.mask_span_ms < 0.0 {
        return Err(TimingError::NegativeSpan);
    }
    let off_by = t.stimulus_frames_shown.abs_diff(q.frames);
    Ok(if off_by == 0 && t.dropped_frames == 0 {
        Verdict::Ok
    } else if off_by <= slack_frames && t.dropped_frames <= slack_frames {
        Verdict::Degraded
    } else {
        Verdict::Invalid
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hz(r: f64) -> DisplayProfile {
        DisplayProfile::new(r).unwrap()
    }

    /// Oracle: try every frame count near the exact ratio, keep the closest,
    /// preferring the larger count on a tie.
    fn nearest_frames(requested: f64, refresh: f64) -> u32 {
        let frame = 1000.0 / refresh;
        let centre = (requested / frame) as i64;
        let mut best = (f64::INFINITY, 1u32);
        for f in (centre - 2).max(1)..=centre + 2 {
            let err = (f as f64 * frame - requested).abs();
            if err < best.0 - 1e-9 || ((err - best.0).abs() <= 1e-9 && f as u32 > best.1) {
                best = (err, f as u32);
            }
        }
        best.1
    }

    #[test]
    fn exact_cases_at_60hz() {
        let q = quantize(50.0, hz(60.0)).unwrap();
        assert_eq!((q.frames, q.achieved_ms), (3, 50.0));
        let q = quantize(100.0, hz(60.0)).unwrap();
        assert_eq!((q.frames, q.achieved_ms), (6, 100.0));
    }

    #[test]
    fn enumerated_cases() {
        assert_eq!(nearest_frames(50.0, 75.0), 4);
        assert_eq!(nearest_frames(40.0, 60.0), 2);
        let q = quantize(50.0, hz(75.0)).unwrap();
        assert_eq!(q.frames, 4);
        assert!((q.achieved_ms - 160.0 / 3.0).abs() < 1e-9);
        let q = quantize(40.0, hz(60.0)).unwrap();
        assert_eq!(q.frames, 2);
        assert!((q.achieved_ms - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn short_request_gets_one_frame() {
        assert_eq!(quantize(1.0, hz(60.0)).unwrap().frames, 1);
        // 25 ms at 60 Hz is 1.5 frames; ties round up
        assert_eq!(quantize(25.0, hz(60.0)).unwrap().frames, 2);
    }

    #[test]
    fn domain_errors() {
        assert!(quantize(0.0, hz(60.0)).is_err());
        assert!(quantize(-3.0, hz(60.0)).is_err());
        assert!(DisplayProfile::new(10.0).is_err());
        assert!(DisplayProfile::new(501.0).is_err());
    }

    fn spec(index: usize) -> TrialSpec {
        TrialSpec {
            index,
            word: "power".into(),
            category: crate::lexicon::GoalCategory::Power,
            stimulus_ms: 50.0,
            mask_enabled: true,
            mask_ms: 100.0,
            mask_text: "QZKWPLR".into(),
            inter_trial_pause_ms: 4000.0,
        }
    }

    fn telemetry(shown: u32, dropped: u32) -> TrialTelemetry {
        TrialTelemetry {
            trial_index: 0,
            stimulus_frames_shown: shown,
            stimulus_span_ms: shown as f64 * 16.7,
            mask_span_ms: 100.0,
            dropped_frames: dropped,
        }
    }

    #[test]
    fn verdicts() {
        let q = quantize(50.0, hz(60.0)).unwrap();
        assert_eq!(verify_telemetry(&spec(0), &q, &telemetry(3, 0), 1), Ok(Verdict::Ok));
        assert_eq!(verify_telemetry(&spec(0), &q, &telemetry(4, 0), 1), Ok(Verdict::Degraded));
        assert_eq!(verify_telemetry(&spec(0), &q, &telemetry(6, 0), 1), Ok(Verdict::Invalid));
        assert_eq!(verify_telemetry(&spec(0), &q, &telemetry(3, 1), 1), Ok(Verdict::Degraded));
        assert_eq!(verify_telemetry(&spec(0), &q, &telemetry(3, 2), 1), Ok(Verdict::Invalid));
        assert!(matches!(
            verify_telemetry(&spec(1), &q, &telemetry(3, 0), 1),
            Err(TimingError::TrialMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn matches_enumeration_oracle(req in 1.0f64..400.0, refresh in 20.0f64..500.0) {
            let q = quantize(req, hz(refresh)).unwrap();
            let exact = req * refresh / 1000.0;
            // skip near-ties where floating error decides the winner
            prop_assume!((exact.fract() - 0.5).abs() > 1e-6);
            prop_assert_eq!(q.frames, nearest_frames(req, refresh));
        }

        #[test]
        fn error_bound(req in 1.0f64..400.0, refresh in 20.0f64..500.0) {
            let p = hz(refresh);
            let q = quantize(req, p).unwrap();
            if req >= p.frame_ms() / 2.0 {
                prop_assert!((q.achieved_ms - req).abs() <= p.frame_ms() / 2.0 + 1e-9);
            } else {
                prop_assert_eq!(q.frames, 1);
            }
        }

        #[test]
        fn ok_verdict_within_one_frame(req in 10.0f64..200.0, refresh in 20.0f64..500.0) {
            let p = hz(refresh);
            let q = quantize(req, p).unwrap();
            let t = TrialTelemetry { trial_index: 0, stimulus_frames_shown: q.frames,
                stimulus_span_ms: q.achieved_ms, mask_span_ms: 0.0, dropped_frames: 0 };
            prop_assert_eq!(verify_telemetry(&spec(0), &q, &t, 1).unwrap(), Verdict::Ok);
            prop_assert!((p.frames_to_ms(t.stimulus_frames_shown) - q.achieved_ms).abs() <= p.frame_ms());
        }
    }
}
