//! Guards keeping identifying data out of persisted session records.
//!
//! Participants are known to the engine only by an opaque token; the
//! mapping from token to person is kept outside the system.

use std::sync::LazyLock;

use regex::Regex;

static PID: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z0-9][A-Za-z0-9_-]{0,63}$").expect("valid regex"));
static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[^\s@]+@[^\s@]+\.[^\s@]+").expect("valid regex"));
static PHONE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\+?\d[\d\s().-]{7,}\d").expect("valid regex"));

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PrivacyError {
    #[error("participant id must be an opaque token of letters, digits, '-' or '_' (max 64)")]
    NotOpaque,
    #[error("field '{0}' looks like it contains contact details")]
    ContactDetails(&'static str),
}

pub fn check_pid(pid: &str) -> Result<(), PrivacyError> {
    if !PID.is_match(pid) {
        return Err(PrivacyError::NotOpaque);
    }
    Ok(())
}

/// Rejects free text containing e-mail addresses or phone numbers.
pub fn check_free_text(field: &'static str, text: &str) -> Result<(), PrivacyError> {
    if EMAIL.is_match(text) || PHONE.is_match(text) {
        return Err(PrivacyError::ContactDetails(field));
    }
    Ok(())
}
