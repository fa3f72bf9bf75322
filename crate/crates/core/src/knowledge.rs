//! Domain records for a shared information problem and the collaborative
//! activity captured around it.
//!
//! Every record here is an immutable value: mutations produce a new revision
//! that the repository persists as an [`ActivityEvent`]. The mapping from
//! activity kinds to knowledge-conversion processes lives in
//! [`classify_activity`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;
use uuid::Uuid;

use crate::IndicatorReport;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KnowledgeError {
    #[error("problem statement is empty")]
    EmptyStatement,
    #[error("body is empty")]
    EmptyBody,
    #[error("evaluation annotations must target a document")]
    KindTargetMismatch,
    #[error("indicator attribute and value must be non-empty")]
    InvalidIndicator,
    #[error("invalid information source locator `{0}`")]
    InvalidSource(String),
    #[error("invalid {what} `{value}`")]
    InvalidIdentifier { what: &'static str, value: String },
    #[error("unknown activity kind `{0}`")]
    UnknownKind(String),
    #[error("sub-problem link would create a cycle")]
    SubProblemCycle,
}

macro_rules! uuid_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Uuid);

        impl $name {
            pub fn new() -> Self {
                Self(Uuid::new_v4())
            }

            pub fn from_uuid(id: Uuid) -> Self {
                Self(id)
            }
        }

        impl Default for $name {
            fn default() -> Self {
                Self::new()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl FromStr for $name {
            type Err = KnowledgeError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Uuid::parse_str(s).map(Self).map_err(|_| KnowledgeError::InvalidIdentifier {
                    what: stringify!($name),
                    value: s.to_string(),
                })
            }
        }
    };
}

uuid_id!(
    /// Identifier of a [`ProblemDefinition`], stable across revisions.
    ProblemId
);
uuid_id!(DocumentId);
uuid_id!(AnnotationId);

/// A user identifier. Any non-empty string of at most 64 characters without
/// whitespace or control characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct UserId(String);

impl UserId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for UserId {
    type Error = KnowledgeError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        let ok = !value.is_empty()
            && value.chars().count() <= 64
            && !value.chars().any(|c| c.is_whitespace() || c.is_control());
        if ok {
            Ok(Self(value))
        } else {
            Err(KnowledgeError::InvalidIdentifier { what: "user id", value })
        }
    }
}

impl FromStr for UserId {
    type Err = KnowledgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::try_from(s.to_string())
    }
}

impl From<UserId> for String {
    fn from(id: UserId) -> Self {
        id.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A workspace identifier. Restricted to `[A-Za-z0-9_-]{1,64}` because it
/// doubles as the on-disk directory name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct WorkspaceId(String);

impl WorkspaceId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for WorkspaceId {
    type Error = KnowledgeError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        let ok = (1..=64).contains(&value.len())
            && value.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
        if ok {
            Ok(Self(value))
        } else {
            Err(KnowledgeError::InvalidIdentifier { what: "workspace id", value })
        }
    }
}

impl FromStr for WorkspaceId {
    type Err = KnowledgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::try_from(s.to_string())
    }
}

impl From<WorkspaceId> for String {
    fn from(id: WorkspaceId) -> Self {
        id.0
    }
}

impl fmt::Display for WorkspaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An attribute-value pair users expect to find in relevant documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indicator {
    pub attribute: String,
    pub value: String,
}

impl Indicator {
    pub fn new(attribute: impl Into<String>, value: impl Into<String>) -> Result<Self, KnowledgeError> {
        let attribute = attribute.into().trim().to_string();
        let value = value.into().trim().to_string();
        if attribute.is_empty() || value.is_empty() {
            return Err(KnowledgeError::InvalidIndicator);
        }
        Ok(Self { attribute, value })
    }

    pub(crate) fn validate(&self) -> Result<(), KnowledgeError> {
        if self.attribute.trim().is_empty() || self.value.trim().is_empty() {
            Err(KnowledgeError::InvalidIndicator)
        } else {
            Ok(())
        }
    }
}

const PERSON_PREFIX: &str = "person:";

/// Where information may be found: a system reachable by URL, or a person.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationSource {
    pub name: String,
    pub locator: String,
}

impl InformationSource {
    pub fn new(name: impl Into<String>, locator: impl Into<String>) -> Result<Self, KnowledgeError> {
        let source = Self { name: name.into(), locator: locator.into() };
        source.validate()?;
        Ok(source)
    }

    pub fn person(display_name: &str) -> Result<Self, KnowledgeError> {
        Self::new(display_name, format!("{PERSON_PREFIX}{display_name}"))
    }

    pub fn is_person(&self) -> bool {
        self.locator.starts_with(PERSON_PREFIX)
    }

    pub(crate) fn validate(&self) -> Result<(), KnowledgeError> {
        let valid = match self.locator.strip_prefix(PERSON_PREFIX) {
            Some(name) => !name.trim().is_empty(),
            None => Url::parse(&self.locator).map(|u| u.has_host()).unwrap_or(false),
        };
        if valid {
            Ok(())
        } else {
            Err(KnowledgeError::InvalidSource(self.locator.clone()))
        }
    }
}

/// The shared information problem and its clarification attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDefinition {
    pub id: ProblemId,
    pub statement: String,
    pub objective: String,
    pub timestamp: DateTime<Utc>,
    pub domains: BTreeSet<String>,
    pub keywords: Vec<String>,
    pub sources: Vec<InformationSource>,
    pub indicators: Vec<Indicator>,
    pub sub_problems: Vec<ProblemId>,
    pub extra_attributes: BTreeMap<String, String>,
}

impl ProblemDefinition {
    pub fn new(statement: &str, objective: &str, now: DateTime<Utc>) -> Result<Self, KnowledgeError> {
        let statement = statement.trim();
        if statement.is_empty() {
            return Err(KnowledgeError::EmptyStatement);
        }
        Ok(Self {
            id: ProblemId::new(),
            statement: statement.to_string(),
            objective: objective.trim().to_string(),
            timestamp: now,
            domains: BTreeSet::new(),
            keywords: Vec::new(),
            sources: Vec::new(),
            indicators: Vec::new(),
            sub_problems: Vec::new(),
            extra_attributes: BTreeMap::new(),
        })
    }

    /// Advances the revision timestamp. Never moves it backwards.
    pub fn touch(&mut self, now: DateTime<Utc>) {
        if now > self.timestamp {
            self.timestamp = now;
        }
    }

    /// Adds a keyword unless an equal one (ignoring case) is present.
    /// Returns whether the keyword was added.
    pub fn add_keyword(&mut self, keyword: &str) -> bool {
        let keyword = keyword.trim();
        if keyword.is_empty() {
            return false;
        }
        let folded = keyword.to_lowercase();
        if self.keywords.iter().any(|k| k.to_lowercase() == folded) {
            return false;
        }
        self.keywords.push(keyword.to_string());
        true
    }

    pub fn add_sub_problem(&mut self, child: ProblemId) -> Result<(), KnowledgeError> {
        if child == self.id || self.sub_problems.contains(&child) {
            return Err(KnowledgeError::SubProblemCycle);
        }
        self.sub_problems.push(child);
        Ok(())
    }

    /// Applies a revision patch, producing the next revision.
    pub fn revised(&self, patch: &ProblemPatch, now: DateTime<Utc>) -> Result<Self, KnowledgeError> {
        let mut next = self.clone();
        if let Some(statement) = &patch.statement {
            let statement = statement.trim();
            if statement.is_empty() {
                return Err(KnowledgeError::EmptyStatement);
            }
            next.statement = statement.to_string();
        }
        if let Some(objective) = &patch.objective {
            next.objective = objective.trim().to_string();
        }
        for domain in &patch.add_domains {
            let domain = domain.trim();
            if !domain.is_empty() {
                next.domains.insert(domain.to_string());
            }
        }
        for keyword in &patch.add_keywords {
            next.add_keyword(keyword);
        }
        for source in &patch.add_sources {
            source.validate()?;
            if !next.sources.contains(source) {
                next.sources.push(source.clone());
            }
        }
        for indicator in &patch.add_indicators {
            indicator.validate()?;
            let indicator = Indicator::new(indicator.attribute.as_str(), indicator.value.as_str())?;
            if !next.indicators.contains(&indicator) {
                next.indicators.push(indicator);
            }
        }
        for (name, value) in &patch.set_attributes {
            if name.trim().is_empty() {
                return Err(KnowledgeError::InvalidIdentifier { what: "attribute name", value: name.clone() });
            }
            next.extra_attributes.insert(name.trim().to_string(), value.clone());
        }
        next.touch(now);
        Ok(next)
    }
}

/// Changes to apply to a problem definition in one revision.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemPatch {
    pub statement: Option<String>,
    pub objective: Option<String>,
    pub add_domains: Vec<String>,
    pub add_keywords: Vec<String>,
    pub add_sources: Vec<InformationSource>,
    pub add_indicators: Vec<Indicator>,
    pub set_attributes: BTreeMap<String, String>,
}

impl ProblemPatch {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "id")]
pub enum EntityRef {
    Problem(ProblemId),
    Document(DocumentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    Clarification,
    SubProblemProposal,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: AnnotationId,
    pub author: UserId,
    pub target: EntityRef,
    pub body: String,
    pub kind: AnnotationKind,
    pub timestamp: DateTime<Utc>,
}

impl AnnotationRecord {
    /// Builds a record, checking body and kind/target compatibility. Whether
    /// the target exists is the caller's concern.
    pub fn new(
        author: UserId,
        target: EntityRef,
        body: &str,
        kind: AnnotationKind,
        now: DateTime<Utc>,
    ) -> Result<Self, KnowledgeError> {
        let body = body.trim();
        if body.is_empty() {
            return Err(KnowledgeError::EmptyBody);
        }
        if kind == AnnotationKind::Evaluation && !matches!(target, EntityRef::Document(_)) {
            return Err(KnowledgeError::KindTargetMismatch);
        }
        Ok(Self { id: AnnotationId::new(), author, target, body: body.to_string(), kind, timestamp: now })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: DocumentId,
    pub url: Url,
    pub title: String,
    pub fetched_text: String,
    pub first_viewer: UserId,
    pub timestamp: DateTime<Utc>,
}

/// The ten kinds of captured collaborative activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    ChatMessage,
    ViewSync,
    ProblemEdit,
    AnnotationAdded,
    QuerySubmitted,
    TagAdded,
    MetadataAdded,
    ClassificationAdded,
    HistoryViewed,
    DocumentOpened,
}

impl ActivityKind {
    pub const ALL: [ActivityKind; 10] = [
        ActivityKind::ChatMessage,
        ActivityKind::ViewSync,
        ActivityKind::ProblemEdit,
        ActivityKind::AnnotationAdded,
        ActivityKind::QuerySubmitted,
        ActivityKind::TagAdded,
        ActivityKind::MetadataAdded,
        ActivityKind::ClassificationAdded,
        ActivityKind::HistoryViewed,
        ActivityKind::DocumentOpened,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityKind::ChatMessage => "chat_message",
            ActivityKind::ViewSync => "view_sync",
            ActivityKind::ProblemEdit => "problem_edit",
            ActivityKind::AnnotationAdded => "annotation_added",
            ActivityKind::QuerySubmitted => "query_submitted",
            ActivityKind::TagAdded => "tag_added",
            ActivityKind::MetadataAdded => "metadata_added",
            ActivityKind::ClassificationAdded => "classification_added",
            ActivityKind::HistoryViewed => "history_viewed",
            ActivityKind::DocumentOpened => "document_opened",
        }
    }
}

impl FromStr for ActivityKind {
    type Err = KnowledgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActivityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| KnowledgeError::UnknownKind(s.to_string()))
    }
}

impl fmt::Display for ActivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Nonaka's knowledge-conversion processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeProcess {
    /// tacit to tacit
    Socialization,
    /// tacit to explicit
    Externalization,
    /// explicit to explicit
    Combination,
    /// explicit to tacit
    Internalization,
}

impl KnowledgeProcess {
    pub const ALL: [KnowledgeProcess; 4] = [
        KnowledgeProcess::Socialization,
        KnowledgeProcess::Externalization,
        KnowledgeProcess::Combination,
        KnowledgeProcess::Internalization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KnowledgeProcess::Socialization => "socialization",
            KnowledgeProcess::Externalization => "externalization",
            KnowledgeProcess::Combination => "combination",
            KnowledgeProcess::Internalization => "internalization",
        }
    }
}

impl fmt::Display for KnowledgeProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maps an activity to the knowledge-conversion process it facilitates.
pub const fn classify_activity(kind: ActivityKind) -> KnowledgeProcess {
    use ActivityKind::*;
    match kind {
        ChatMessage | ViewSync => KnowledgeProcess::Socialization,
        ProblemEdit | AnnotationAdded => KnowledgeProcess::Externalization,
        QuerySubmitted | TagAdded | MetadataAdded | ClassificationAdded => KnowledgeProcess::Combination,
        HistoryViewed | DocumentOpened => KnowledgeProcess::Internalization,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemChange {
    Created,
    Revised,
}

/// Outcome of retrieving a document, as recorded in the activity log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchSummary {
    pub status: crate::fetcher::FetchStatus,
    pub byte_size: u64,
}

impl FetchSummary {
    pub fn failed(&self) -> bool {
        !self.status.is_ok()
    }
}

/// Kind-specific content of an activity event. The variant determines the
/// event's [`ActivityKind`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventPayload {
    ChatMessage {
        body: String,
    },
    ViewSync {
        leader: UserId,
        document: DocumentId,
    },
    ProblemEdit {
        change: ProblemChange,
        problem: ProblemDefinition,
    },
    AnnotationAdded {
        annotation: AnnotationRecord,
        /// Problem revisions produced together with the annotation: the
        /// touched target and, for decompositions, the new sub-problem.
        revisions: Vec<ProblemDefinition>,
    },
    QuerySubmitted {
        query: String,
        source: String,
    },
    TagAdded {
        document: DocumentId,
        tag: String,
    },
    MetadataAdded {
        document: DocumentId,
        key: String,
        value: String,
    },
    ClassificationAdded {
        document: DocumentId,
        class: String,
    },
    HistoryViewed {},
    DocumentOpened {
        document: DocumentRecord,
        /// Present only when the document was fetched for this event.
        fetch: Option<FetchSummary>,
        report: Option<IndicatorReport>,
    },
}

impl EventPayload {
    pub fn kind(&self) -> ActivityKind {
        match self {
            EventPayload::ChatMessage { .. } => ActivityKind::ChatMessage,
            EventPayload::ViewSync { .. } => ActivityKind::ViewSync,
            EventPayload::ProblemEdit { .. } => ActivityKind::ProblemEdit,
            EventPayload::AnnotationAdded { .. } => ActivityKind::AnnotationAdded,
            EventPayload::QuerySubmitted { .. } => ActivityKind::QuerySubmitted,
            EventPayload::TagAdded { .. } => ActivityKind::TagAdded,
            EventPayload::MetadataAdded { .. } => ActivityKind::MetadataAdded,
            EventPayload::ClassificationAdded { .. } => ActivityKind::ClassificationAdded,
            EventPayload::HistoryViewed {} => ActivityKind::HistoryViewed,
            EventPayload::DocumentOpened { .. } => ActivityKind::DocumentOpened,
        }
    }
}

/// One captured collaborative action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub seq: u64,
    pub actor: UserId,
    pub workspace: WorkspaceId,
    #[serde(flatten)]
    pub payload: EventPayload,
    pub process: KnowledgeProcess,
    pub timestamp: DateTime<Utc>,
}

impl ActivityEvent {
    pub fn new(
        seq: u64,
        actor: UserId,
        workspace: WorkspaceId,
        payload: EventPayload,
        timestamp: DateTime<Utc>,
    ) -> Self {
        let process = classify_activity(payload.kind());
        Self { seq, actor, workspace, payload, process, timestamp }
    }

    pub fn kind(&self) -> ActivityKind {
        self.payload.kind()
    }
}
