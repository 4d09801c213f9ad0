//! Event logs as JSON lines, and deterministic replay against a fresh hub.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ServiceConfig;
use crate::hub::{Hub, Outcome};
use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Header,
    Command,
    Reply,
    Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub index: u64,
    pub kind: EntryKind,
    /// Wall clock, milliseconds since the Unix epoch. Ignored by replay.
    pub time_ms: u64,
    pub payload: Value,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// In-memory log of a hub's inputs and outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    entries: Vec<LogEntry>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn push(&mut self, kind: EntryKind, payload: Value) -> &LogEntry {
        let index = self.entries.len() as u64;
        self.entries.push(LogEntry {
            index,
            kind,
            time_ms: now_ms(),
            payload,
        });
        self.entries.last().expect("just pushed")
    }

    /// Records a command together with what the hub made of it.
    pub fn push_outcome(&mut self, command: &Value, outcome: &Outcome) -> Vec<LogEntry> {
        let start = self.entries.len();
        self.push(EntryKind::Command, command.clone());
        self.push(
            EntryKind::Reply,
            serde_json::to_value(&outcome.reply).expect("reply serializes"),
        );
        for e in &outcome.events {
            self.push(EntryKind::Event, e.clone());
        }
        self.entries[start..].to_vec()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.entries {
            write_entry(&mut out, e)?;
        }
        out.flush()
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, ServiceError> {
        let file = std::fs::File::open(path).map_err(|e| ServiceError::Log(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| ServiceError::Log(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: LogEntry = serde_json::from_str(&line)
                .map_err(|e| ServiceError::Log(format!("{}:{}: {e}", path.display(), i + 1)))?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn header(&self) -> Option<&Value> {
        self.entries
            .iter()
            .find(|e| e.kind == EntryKind::Header)
            .map(|e| &e.payload)
    }
}

pub fn write_entry<W: Write>(out: &mut W, entry: &LogEntry) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, entry)?;
    out.write_all(b"\n")
}

/// Header payload holding the configuration a log was recorded with.
pub fn header_payload(config: &ServiceConfig) -> Value {
    serde_json::json!({ "config": config })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub index: usize,
    pub expected: Option<Value>,
    pub actual: Option<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub commands: usize,
    pub outputs_compared: usize,
    pub mismatch: Option<Mismatch>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.mismatch.is_none()
    }
}

/// Feeds the recorded commands to `hub` and compares every reply and event
/// with the recording, ignoring wall-clock stamps.
pub fn replay(log: &EventLog, hub: &mut Hub) -> ReplayReport {
    let mut replayed = EventLog::new();
    let mut commands = 0;
    for entry in log.entries().iter().filter(|e| e.kind == EntryKind::Command) {
        let outcome = hub.apply_value(&entry.payload);
        replayed.push_outcome(&entry.payload, &outcome);
        commands += 1;
    }
    let outputs = |l: &EventLog| -> Vec<Value> {
        l.entries()
            .iter()
            .filter(|e| matches!(e.kind, EntryKind::Reply | EntryKind::Event))
            .map(|e| e.payload.clone())
            .collect()
    };
    let (expected, actual) = (outputs(log), outputs(&replayed));
    let mismatch = (0..expected.len().max(actual.len()))
        .find(|&i| expected.get(i) != actual.get(i))
        .map(|i| Mismatch {
            index: i,
            expected: expected.get(i).cloned(),
            actual: actual.get(i).cloned(),
        });
    ReplayReport {
        commands,
        outputs_compared: expected.len(),
        mismatch,
    }
}

/// Replays a log file using the configuration stored in its header.
pub fn replay_file(path: &Path) -> Result<ReplayReport, ServiceError> {
    let log = EventLog::read_jsonl(path)?;
    let header = log
        .header()
        .ok_or_else(|| ServiceError::Log(format!("{} has no header entry", path.display())))?;
    let config: ServiceConfig = serde_json::from_value(header["config"].clone())
        .map_err(|e| ServiceError::Log(format!("header config: {e}")))?;
    let mut hub = Hub::from_config(&config)?;
    Ok(replay(&log, &mut hub))
}
