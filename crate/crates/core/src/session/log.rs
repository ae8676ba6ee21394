use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::events::EventRecord;
use super::SessionError;

/// How hard an append pushes bytes toward the disk before returning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// Flush to the OS; survives a process crash.
    #[default]
    Flush,
    /// Also fsync; survives power loss.
    Sync,
}

/// Append handle on one session's log.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    durability: Durability,
}

impl EventLog {
    /// Creates a new log, failing if one already exists at `path`.
    pub fn create(path: impl Into<PathBuf>, durability: Durability) -> io::Result<Self> {
        let path = path.into();
        let file = OpenOptions::new().append(true).create_new(true).open(&path)?;
        Ok(EventLog { path, file, durability })
    }

    pub fn open(path: impl Into<PathBuf>, durability: Durability) -> io::Result<Self> {
        let path = path.into();
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(EventLog { path, file, durability })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes the records, one JSON object per line.
    pub fn append(&mut self, records: &[EventRecord]) -> Result<(), SessionError> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).map_err(|e| SessionError::Internal(e.to_string()))?;
            buf.push(b'\n');
        }
        // a single write keeps a torn record confined to the final line
        (&self.file).write_all(&buf)?;
        if self.durability == Durability::Sync {
            self.file.sync_data()?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct LoadedLog {
    pub records: Vec<EventRecord>,
    /// Bytes of an unterminated final line that were discarded.
    pub discarded_tail: usize,
}

/// Reads a log, dropping an unterminated final line left by a crash.
///
/// The file itself is truncated back to the last complete line so later
/// appends start clean. A complete line that does not parse is an error.
pub fn read_log(path: &Path) -> Result<LoadedLog, SessionError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let discarded_tail = bytes.len() - complete;
    if discarded_tail > 0 {
        OpenOptions::new().write(true).open(path)?.set_len(complete as u64)?;
    }
    let text = std::str::from_utf8(&bytes[..complete])
        .map_err(|e| SessionError::Corrupt(format!("{}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(line).map_err(|e| {
            SessionError::Corrupt(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        records.push(rec);
    }
    Ok(LoadedLog {
        records,
        discarded_tail,
    })
}

/// Atomically replaces `path` with the pretty-printed JSON of `value`.
pub(crate) fn write_snapshot<T: Serialize>(path: &Path, value: &T) -> Result<(), SessionError> {
    let tmp = path.with_extension("json.tmp");
    let mut buf =
        serde_json::to_vec_pretty(value).map_err(|e| SessionError::Internal(e.to_string()))?;
    buf.push(b'\n');
    fs::write(&tmp, &buf)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
