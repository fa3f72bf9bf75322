//! The `events.log` line format and log replay.
//!
//! One event per line, UTF-8, terminated by `\n`. Each line is a JSON object
//! with exactly these keys, in this order:
//!
//! ```text
//! {"seq":1,"timestamp":"2026-10-16T09:30:00.123456789Z","actor":"u1","kind":"chat_message","process":"socialization","payload":{"body":"hi"}}
//! ```
//!
//! A line without its terminating newline is a torn write.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use chrono::{DateTime, Utc};

use super::state::WorkspaceState;
use crate::knowledge::{
    classify_activity, ActivityEvent, ActivityKind, EventPayload, KnowledgeProcess, UserId, WorkspaceId,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("corrupt log record at byte offset {offset} (line {line}): {reason}")]
pub struct CorruptLog {
    pub offset: u64,
    pub line: u64,
    pub reason: String,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    seq: u64,
    timestamp: &'a DateTime<Utc>,
    actor: &'a UserId,
    kind: ActivityKind,
    process: KnowledgeProcess,
    payload: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    seq: u64,
    timestamp: DateTime<Utc>,
    actor: UserId,
    kind: String,
    process: KnowledgeProcess,
    payload: Value,
}

/// Encodes an event as one log line, newline included.
pub fn encode_event(event: &ActivityEvent) -> String {
    let mut tagged = serde_json::to_value(&event.payload).expect("payload serializes");
    let payload = tagged.get_mut("payload").map(Value::take).unwrap_or_else(|| Value::Object(Default::default()));
    let record = RecordOut {
        seq: event.seq,
        timestamp: &event.timestamp,
        actor: &event.actor,
        kind: event.kind(),
        process: event.process,
        payload,
    };
    let mut line = serde_json::to_string(&record).expect("record serializes");
    line.push('\n');
    line
}

/// Decodes one line (without its newline).
pub fn decode_event(workspace: &WorkspaceId, line: &str) -> Result<ActivityEvent, String> {
    let record: RecordIn = serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    let kind: ActivityKind = record.kind.parse().map_err(|e| format!("{e}"))?;
    if record.process != classify_activity(kind) {
        return Err(format!("process `{}` contradicts kind `{kind}`", record.process));
    }
    let payload: EventPayload = serde_json::from_value(serde_json::json!({
        "kind": kind.as_str(),
        "payload": record.payload,
    }))
    .map_err(|e| format!("malformed {kind} payload: {e}"))?;
    Ok(ActivityEvent {
        seq: record.seq,
        actor: record.actor,
        workspace: workspace.clone(),
        payload,
        process: record.process,
        timestamp: record.timestamp,
    })
}

/// A replayed log: every event and the folded state.
#[derive(Debug, Clone)]
pub struct Replayed {
    pub events: Vec<ActivityEvent>,
    pub state: WorkspaceState,
    /// Byte length of the well-formed prefix.
    pub valid_len: u64,
}

/// Parses and folds a whole log. Stops at the first malformed record.
pub fn replay(workspace: &WorkspaceId, bytes: &[u8]) -> Result<Replayed, CorruptLog> {
    let mut state = WorkspaceState::empty(workspace.clone());
    let mut events = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0u64;

    while offset < bytes.len() {
        line_no += 1;
        let corrupt = |reason: String| CorruptLog { offset: offset as u64, line: line_no, reason };
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(corrupt("truncated record (missing newline)".into()));
        };
        let line = std::str::from_utf8(&rest[..nl]).map_err(|_| corrupt("invalid UTF-8".into()))?;
        let event = decode_event(workspace, line).map_err(corrupt)?;
        let expected = state.last_seq + 1;
        if event.seq != expected {
            return Err(corrupt(format!("expected seq {expected}, found {}", event.seq)));
        }
        state.apply(&event);
        events.push(event);
        offset += nl + 1;
    }
    Ok(Replayed { events, state, valid_len: offset as u64 })
}

/// Folds the first `n` events over the empty state.
pub fn fold_prefix(workspace: &WorkspaceId, events: &[ActivityEvent], n: usize) -> WorkspaceState {
    let mut state = WorkspaceState::empty(workspace.clone());
    for event in events.iter().take(n) {
        state.apply(event);
    }
    state
}
