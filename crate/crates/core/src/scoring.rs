//! Classification of spoken reports against the presented word.

use serde::{Deserialize, Serialize};

use crate::scheduler::TrialSpec;
use crate::timing::Verdict;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScoringError {
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Confident,
    Unsure,
    StatedGuess,
    #[default]
    NoneGiven,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResponse {
    pub trial_index: usize,
    /// `None` when the participant reported no word.
    pub reported: Option<String>,
    #[serde(default)]
    pub confidence: Confidence,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub telemetry_verdict: Verdict,
}

impl TrialResponse {
    pub fn word(trial_index: usize, reported: &str, confidence: Confidence) -> Self {
        TrialResponse {
            trial_index,
            reported: Some(reported.to_string()),
            confidence,
            note: String::new(),
            telemetry_verdict: Verdict::Ok,
        }
    }

    pub fn no_report(trial_index: usize) -> Self {
        TrialResponse {
            trial_index,
            reported: None,
            confidence: Confidence::NoneGiven,
            note: String::new(),
            telemetry_verdict: Verdict::Ok,
        }
    }

    /// Normalized report, `None` for no report or a report with no letters.
    pub fn normalized(&self) -> Option<String> {
        self.reported.as_deref().and_then(normalize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Correct,
    Partial,
    Intrusion,
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: Kind,
    pub perseveration: bool,
    pub mask_intrusion: bool,
    pub lcs_len: usize,
}

/// Thresholds for calling a wrong report a partial recognition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialRule {
    pub min_fragment: usize,
    /// Fraction of the presented word's length that also suffices.
    pub min_fraction: f64,
}

impl Default for PartialRule {
    fn default() -> Self {
        PartialRule {
            min_fragment: 3,
            min_fraction: 0.5,
        }
    }
}

impl PartialRule {
    pub fn is_partial(&self, lcs: usize, presented_len: usize) -> bool {
        let by_fraction = (presented_len as f64 * self.min_fraction).ceil() as usize;
        lcs >= 1 && (lcs >= self.min_fragment || lcs >= by_fraction)
    }
}

/// Case-folds, trims and strips non-letters.
///
/// A single whitespace-separated token keeps all its letters (`"don't"` →
/// `"dont"`); a multi-token input keeps only its longest run of letters,
/// the first one on ties (`"don't know"` → `"know"`).
pub fn normalize(raw: &str) -> Option<String> {
    let lowered = raw.trim().to_lowercase();
    let tokens = lowered.split_whitespace().count();
    let out: String = if tokens <= 1 {
        lowered.chars().filter(|c| c.is_alphabetic()).collect()
    } else {
        lowered
            .split(|c: char| !c.is_alphabetic())
            .fold("", |best, run| {
                if run.chars().count() > best.chars().count() {
                    run
                } else {
                    best
                }
            })
            .to_string()
    };
    (!out.is_empty()).then_some(out)
}

/// Length of the longest common contiguous substring, in characters.
pub fn longest_common_substring(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &ca in &a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

pub fn classify(
    response: &TrialResponse,
    presented: &TrialSpec,
    history: &[(TrialSpec, TrialResponse)],
) -> Result<Classification, ScoringError> {
    classify_with(response, presented, history, PartialRule::default())
}

pub fn classify_with(
    response: &TrialResponse,
    presented: &TrialSpec,
    history: &[(TrialSpec, TrialResponse)],
    rule: PartialRule,
) -> Result<Classification, ScoringError> {
    if presented.index != response.trial_index {
        return Err(ScoringError::Protocol(format!(
            "response for trial {} scored against trial {}",
            response.trial_index, presented.index
        )));
    }
    if history.len() != response.trial_index {
        return Err(ScoringError::Protocol(format!(
            "history holds {} trials, expected {}",
            history.len(),
            response.trial_index
        )));
    }
    for (i, (spec, resp)) in history.iter().enumerate() {
        if spec.index != i || resp.trial_index != i {
            return Err(ScoringError::Protocol(format!(
                "history out of order at position {i}"
            )));
        }
    }

    let Some(report) = response.normalized() else {
        return Ok(Classification {
            kind: Kind::Miss,
            perseveration: false,
            mask_intrusion: false,
            lcs_len: 0,
        });
    };
    let target = presented.word.as_str();
    if report == target {
        return Ok(Classification {
            kind: Kind::Correct,
            perseveration: false,
            mask_intrusion: false,
            lcs_len: target.chars().count(),
        });
    }

    let lcs = longest_common_substring(&report, target);
    let kind = if rule.is_partial(lcs, target.chars().count()) {
        Kind::Partial
    } else {
        Kind::Intrusion
    };
    let perseveration = history
        .iter()
        .any(|(spec, resp)| spec.word == report || resp.normalized().as_deref() == Some(&report));
    let mask = presented.mask_text.to_lowercase();
    let mask_intrusion = kind == Kind::Intrusion
        && !mask.is_empty()
        && report.chars().all(|c| mask.contains(c));
    Ok(Classification {
        kind,
        perseveration,
        mask_intrusion,
        lcs_len: lcs,
    })
}
