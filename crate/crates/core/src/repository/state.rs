//! Materialized workspace state: the left fold of a workspace's events.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::knowledge::{
    ActivityEvent, ActivityKind, AnnotationRecord, DocumentId, DocumentRecord, EventPayload, KnowledgeProcess,
    ProblemChange, ProblemDefinition, ProblemId, UserId, WorkspaceId,
};
use crate::IndicatorReport;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessTally {
    pub socialization: u64,
    pub externalization: u64,
    pub combination: u64,
    pub internalization: u64,
}

impl ProcessTally {
    pub fn get(&self, process: KnowledgeProcess) -> u64 {
        match process {
            KnowledgeProcess::Socialization => self.socialization,
            KnowledgeProcess::Externalization => self.externalization,
            KnowledgeProcess::Combination => self.combination,
            KnowledgeProcess::Internalization => self.internalization,
        }
    }

    fn bump(&mut self, process: KnowledgeProcess) {
        let slot = match process {
            KnowledgeProcess::Socialization => &mut self.socialization,
            KnowledgeProcess::Externalization => &mut self.externalization,
            KnowledgeProcess::Combination => &mut self.combination,
            KnowledgeProcess::Internalization => &mut self.internalization,
        };
        *slot += 1;
    }

    pub fn total(&self) -> u64 {
        self.socialization + self.externalization + self.combination + self.internalization
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub seq: u64,
    pub actor: UserId,
    pub query: String,
    pub source: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub seq: u64,
    pub actor: UserId,
    pub document: DocumentId,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub seq: u64,
    pub actor: UserId,
    pub body: String,
    pub timestamp: DateTime<Utc>,
}

/// Tags, metadata and classifications users attached to a document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentNotes {
    pub tags: BTreeSet<String>,
    pub metadata: BTreeMap<String, String>,
    pub classes: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceState {
    pub workspace: WorkspaceId,
    pub last_seq: u64,
    pub last_timestamp: Option<DateTime<Utc>>,
    pub tally: ProcessTally,
    pub kind_tally: BTreeMap<ActivityKind, u64>,
    /// Users who emitted at least one event here.
    pub participants: BTreeSet<UserId>,
    pub problems: BTreeMap<ProblemId, ProblemDefinition>,
    /// Top-level problems in creation order; the last one is active.
    pub root_problems: Vec<ProblemId>,
    pub annotations: Vec<AnnotationRecord>,
    pub documents: BTreeMap<DocumentId, DocumentRecord>,
    pub documents_by_url: BTreeMap<String, DocumentId>,
    pub document_notes: BTreeMap<DocumentId, DocumentNotes>,
    /// Latest indicator report per problem and document.
    pub reports: BTreeMap<ProblemId, BTreeMap<DocumentId, IndicatorReport>>,
    pub current_document: BTreeMap<UserId, DocumentId>,
    pub queries: Vec<QueryRecord>,
    pub visits: Vec<VisitRecord>,
    pub chat: Vec<ChatRecord>,
}

impl WorkspaceState {
    pub fn empty(workspace: WorkspaceId) -> Self {
        Self {
            workspace,
            last_seq: 0,
            last_timestamp: None,
            tally: ProcessTally::default(),
            kind_tally: BTreeMap::new(),
            participants: BTreeSet::new(),
            problems: BTreeMap::new(),
            root_problems: Vec::new(),
            annotations: Vec::new(),
            documents: BTreeMap::new(),
            documents_by_url: BTreeMap::new(),
            document_notes: BTreeMap::new(),
            reports: BTreeMap::new(),
            current_document: BTreeMap::new(),
            queries: Vec::new(),
            visits: Vec::new(),
            chat: Vec::new(),
        }
    }

    pub fn active_problem(&self) -> Option<&ProblemDefinition> {
        self.root_problems.last().and_then(|id| self.problems.get(id))
    }

    pub fn document_by_url(&self, url: &str) -> Option<&DocumentRecord> {
        self.documents_by_url.get(url).and_then(|id| self.documents.get(id))
    }

    pub fn event_count(&self) -> u64 {
        self.tally.total()
    }

    /// Folds one event into the state. Events must arrive in seq order; the
    /// writer validates payloads before they are logged, so applying is total.
    pub fn apply(&mut self, event: &ActivityEvent) {
        self.last_seq = event.seq;
        self.last_timestamp = Some(event.timestamp);
        self.tally.bump(event.process);
        *self.kind_tally.entry(event.kind()).or_insert(0) += 1;
        self.participants.insert(event.actor.clone());

        match &event.payload {
            EventPayload::ChatMessage { body } => self.chat.push(ChatRecord {
                seq: event.seq,
                actor: event.actor.clone(),
                body: body.clone(),
                timestamp: event.timestamp,
            }),
            EventPayload::ViewSync { document, .. } => {
                self.current_document.insert(event.actor.clone(), *document);
            }
            EventPayload::ProblemEdit { change, problem } => {
                if *change == ProblemChange::Created {
                    self.root_problems.push(problem.id);
                }
                self.problems.insert(problem.id, problem.clone());
            }
            EventPayload::AnnotationAdded { annotation, revisions } => {
                for revision in revisions {
                    self.problems.insert(revision.id, revision.clone());
                }
                self.annotations.push(annotation.clone());
            }
            EventPayload::QuerySubmitted { query, source } => self.queries.push(QueryRecord {
                seq: event.seq,
                actor: event.actor.clone(),
                query: query.clone(),
                source: source.clone(),
                timestamp: event.timestamp,
            }),
            EventPayload::TagAdded { document, tag } => {
                self.document_notes.entry(*document).or_default().tags.insert(tag.clone());
            }
            EventPayload::MetadataAdded { document, key, value } => {
                self.document_notes.entry(*document).or_default().metadata.insert(key.clone(), value.clone());
            }
            EventPayload::ClassificationAdded { document, class } => {
                self.document_notes.entry(*document).or_default().classes.insert(class.clone());
            }
            EventPayload::HistoryViewed {} => {}
            EventPayload::DocumentOpened { document, report, .. } => {
                if !self.documents.contains_key(&document.id) {
                    self.documents_by_url.insert(document.url.to_string(), document.id);
                    self.documents.insert(document.id, document.clone());
                }
                if let Some(report) = report {
                    self.reports.entry(report.problem).or_default().insert(report.document, report.clone());
                }
                self.current_document.insert(event.actor.clone(), document.id);
                self.visits.push(VisitRecord {
                    seq: event.seq,
                    actor: event.actor.clone(),
                    document: document.id,
                    timestamp: event.timestamp,
                });
            }
        }
    }
}
