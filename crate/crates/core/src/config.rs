use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationPolicy;

/// Per-session presentation and scoring settings.
///
/// The calibration policy is flattened, so a config file carries
/// `ladder_ms`, `hit_cutoff` and `preblock_size` as top-level keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub stimulus_ms: f64,
    pub mask_enabled: bool,
    pub mask_ms: f64,
    pub inter_trial_pause_ms: f64,
    pub viewing_distance_note: String,
    #[serde(flatten)]
    pub policy: CalibrationPolicy,
    pub include_partials: bool,
    /// Allow the letter O in pattern masks.
    pub mask_include_o: bool,
    /// Drop trials whose telemetry verdict is invalid from the statistics.
    pub exclude_invalid: bool,
    pub slack_frames: u32,
    /// Refresh rate assumed until the display reports its own.
    pub refresh_hz: f64,
    pub preblock: bool,
    pub memory_probe: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            stimulus_ms: 50.0,
            mask_enabled: true,
            mask_ms: 100.0,
            inter_trial_pause_ms: 4000.0,
            viewing_distance_note: "24 inches".into(),
            policy: CalibrationPolicy::default(),
            include_partials: false,
            mask_include_o: false,
            exclude_invalid: true,
            slack_frames: 1,
            refresh_hz: 60.0,
            preblock: false,
            memory_probe: false,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("stimulus_ms", self.stimulus_ms),
            ("mask_ms", self.mask_ms),
            ("inter_trial_pause_ms", self.inter_trial_pause_ms),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(20.0..=500.0).contains(&self.refresh_hz) {
            return Err(format!("refresh_hz must lie in [20, 500], got {}", self.refresh_hz));
        }
        self.policy.validate().map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_keys_are_top_level() {
        let cfg: SessionConfig =
            serde_json::from_str(r#"{"ladder_ms":[60,45],"hit_cutoff":4,"preblock_size":8}"#).unwrap();
        assert_eq!(cfg.policy.ladder_ms, vec![60.0, 45.0]);
        assert_eq!(cfg.policy.hit_cutoff, 4);
        assert_eq!(cfg.policy.preblock_size, 8);
        assert_eq!(cfg.stimulus_ms, 50.0);
        let v = serde_json::to_value(SessionConfig::default()).unwrap();
        assert!(v.get("ladder_ms").is_some());
        assert!(v.get("policy").is_none());
    }

    #[test]
    fn rejects_non_positive_durations() {
        let cfg = SessionConfig { mask_ms: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(SessionConfig::default().validate().is_ok());
    }
}
