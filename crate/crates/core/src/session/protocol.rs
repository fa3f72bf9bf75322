//! Real-time wire protocol: one JSON object per line, UTF-8, `\n`
//! terminated.
//!
//! Client to server, `{"type": ..., "payload": {...}}`:
//!
//! | type        | payload                                   |
//! |-------------|-------------------------------------------|
//! | `join`      | `{"user": "u1", "since": 12}` (`since` optional) |
//! | `query`     | `{"query": "...", "source": "Google"}`    |
//! | `open`      | `{"url": "https://...", "title": "..."}`  |
//! | `sync`      | `{"leader": "u2"}`                        |
//! | `chat`      | `{"body": "..."}`                         |
//! | `leave`     | none                                      |
//! | `heartbeat` | none                                      |
//!
//! Server to client, `{"type": ..., "seq": N, "payload": {...}}` where `seq`
//! is the causing event for `update` and the workspace high-water mark
//! otherwise: `state`, `update`, `error`, `heartbeat`.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::knowledge::{ActivityEvent, DocumentId, ProblemId, UserId, WorkspaceId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum ClientMessage {
    Join {
        user: UserId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        since: Option<u64>,
    },
    Query {
        query: String,
        source: String,
    },
    Open {
        url: String,
        #[serde(default)]
        title: String,
    },
    Sync {
        leader: UserId,
    },
    Chat {
        body: String,
    },
    Leave,
    Heartbeat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presence {
    Online,
    Offline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresenceChange {
    Joined,
    Left,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceUpdate {
    /// High-water mark when the change happened; presence changes are not
    /// logged events and do not consume a seq.
    pub seq: u64,
    pub actor: UserId,
    pub kind: PresenceChange,
    pub timestamp: DateTime<Utc>,
}

/// What partners are doing: a logged activity or a presence change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum AwarenessUpdate {
    Presence(PresenceUpdate),
    Activity(ActivityEvent),
}

impl AwarenessUpdate {
    pub fn seq(&self) -> u64 {
        match self {
            AwarenessUpdate::Presence(p) => p.seq,
            AwarenessUpdate::Activity(e) => e.seq,
        }
    }

    pub fn actor(&self) -> &UserId {
        match self {
            AwarenessUpdate::Presence(p) => &p.actor,
            AwarenessUpdate::Activity(e) => &e.actor,
        }
    }

    pub fn as_activity(&self) -> Option<&ActivityEvent> {
        match self {
            AwarenessUpdate::Activity(e) => Some(e),
            AwarenessUpdate::Presence(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecentQuery {
    pub query: String,
    pub source: String,
    pub timestamp: DateTime<Utc>,
}

/// Live view of a workspace as handed to a joining member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub workspace: WorkspaceId,
    pub members: BTreeSet<UserId>,
    pub presence: BTreeMap<UserId, Presence>,
    pub current_document: BTreeMap<UserId, DocumentId>,
    /// Most recent last.
    pub recent_queries: BTreeMap<UserId, Vec<RecentQuery>>,
    pub active_problem: Option<ProblemId>,
    pub high_water: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Empty {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State { seq: u64, payload: SessionState },
    Update { seq: u64, payload: AwarenessUpdate },
    Error { seq: u64, payload: ProtocolError },
    Heartbeat { seq: u64, payload: Empty },
}

impl ServerMessage {
    pub fn seq(&self) -> u64 {
        match self {
            ServerMessage::State { seq, .. }
            | ServerMessage::Update { seq, .. }
            | ServerMessage::Error { seq, .. }
            | ServerMessage::Heartbeat { seq, .. } => *seq,
        }
    }

    pub fn update(update: AwarenessUpdate) -> Self {
        ServerMessage::Update { seq: update.seq(), payload: update }
    }

    pub fn error(seq: u64, code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error { seq, payload: ProtocolError { code: code.to_string(), message: message.into() } }
    }
}

/// Serializes a message as one protocol line, newline included.
pub fn encode_line<T: Serialize>(message: &T) -> String {
    let mut line = serde_json::to_string(message).expect("protocol messages serialize");
    line.push('\n');
    line
}

/// Parses one protocol line; surrounding whitespace is ignored.
pub fn decode_line<T: for<'de> Deserialize<'de>>(line: &str) -> Result<T, serde_json::Error> {
    serde_json::from_str(line.trim())
}
