//! The collaborative repository: event-sourced workspaces plus similarity
//! search and collaborator recommendation over everything captured so far.
//!
//! Each workspace has a single writer. A [`Transaction`] holds the writer
//! lock, validates against the current state, and commits events one at a
//! time: the event line is durably appended first, then folded into the
//! state and published as a fresh immutable snapshot for readers.

pub mod log;
pub mod similarity;
pub mod state;
pub mod storage;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;
use std::sync::{Arc, Weak};

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{
    ActivityEvent, AnnotationKind, AnnotationRecord, DocumentId, DocumentRecord, EntityRef, EventPayload,
    KnowledgeError, ProblemChange, ProblemDefinition, ProblemId, ProblemPatch, UserId, WorkspaceId,
};
use crate::{IndicatorReport, SimilarityScore, SimilarityWeights};

pub use log::{decode_event, encode_event, fold_prefix, replay, CorruptLog, Replayed};
pub use similarity::{problem_similarity, PastProblem, SimilarityParts, WeightsError};
pub use state::{ChatRecord, DocumentNotes, ProcessTally, QueryRecord, VisitRecord, WorkspaceState};
pub use storage::{DirStorage, MemoryStorage, Storage, LOG_FILE, SNAPSHOT_FILE};

#[derive(Debug, Error)]
pub enum RepoError {
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error("unknown workspace `{0}`")]
    UnknownWorkspace(WorkspaceId),
    #[error("workspace `{0}` already exists")]
    WorkspaceExists(WorkspaceId),
    #[error("unknown parent problem `{0}`")]
    UnknownParent(ProblemId),
    #[error("unknown problem `{0}`")]
    UnknownProblem(ProblemId),
    #[error("unknown document `{0}`")]
    UnknownDocument(DocumentId),
    #[error("unknown annotation target {0:?}")]
    UnknownTarget(EntityRef),
    #[error("storage failure: {0}")]
    Storage(#[from] io::Error),
    #[error("workspace `{workspace}`: {source}")]
    CorruptLog { workspace: WorkspaceId, source: CorruptLog },
}

impl RepoError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            RepoError::Knowledge(e) => match e {
                KnowledgeError::EmptyStatement => "empty_statement",
                KnowledgeError::EmptyBody => "empty_body",
                KnowledgeError::KindTargetMismatch => "kind_target_mismatch",
                KnowledgeError::InvalidIndicator => "invalid_indicator",
                KnowledgeError::InvalidSource(_) => "invalid_source",
                KnowledgeError::InvalidIdentifier { .. } => "invalid_identifier",
                KnowledgeError::UnknownKind(_) => "unknown_kind",
                KnowledgeError::SubProblemCycle => "sub_problem_cycle",
            },
            RepoError::UnknownWorkspace(_) => "unknown_workspace",
            RepoError::WorkspaceExists(_) => "workspace_exists",
            RepoError::UnknownParent(_) => "unknown_parent",
            RepoError::UnknownProblem(_) => "unknown_problem",
            RepoError::UnknownDocument(_) => "unknown_document",
            RepoError::UnknownTarget(_) => "unknown_target",
            RepoError::Storage(_) => "storage_failure",
            RepoError::CorruptLog { .. } => "corrupt_log",
        }
    }

    pub fn is_not_found(&self) -> bool {
        matches!(
            self,
            RepoError::UnknownWorkspace(_)
                | RepoError::UnknownParent(_)
                | RepoError::UnknownProblem(_)
                | RepoError::UnknownDocument(_)
                | RepoError::UnknownTarget(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepositoryConfig {
    pub weights: SimilarityWeights,
    pub threshold: f64,
    /// A snapshot file is written after this many commits (0 disables).
    pub snapshot_interval: u64,
}

impl Default for RepositoryConfig {
    fn default() -> Self {
        Self { weights: SimilarityWeights::default(), threshold: 0.2, snapshot_interval: 100 }
    }
}

impl RepositoryConfig {
    pub fn validate(&self) -> Result<(), WeightsError> {
        self.weights.validate()?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(WeightsError::BadThreshold(self.threshold));
        }
        Ok(())
    }
}

/// How to treat a log whose last record was torn by a crash.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recovery {
    Strict,
    /// Cut an unterminated final record; any other damage is still fatal.
    TruncateTornTail,
}

/// Receives every committed event while the workspace writer is held, so
/// calls for one workspace arrive in seq order.
pub trait CommitListener: Send + Sync {
    fn on_commit(&self, event: &ActivityEvent);
}

pub trait PresenceOracle {
    fn is_online(&self, user: &UserId) -> bool;
}

impl<F: Fn(&UserId) -> bool> PresenceOracle for F {
    fn is_online(&self, user: &UserId) -> bool {
        self(user)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub seq: u64,
    pub state: WorkspaceState,
}

struct Writer {
    state: WorkspaceState,
    events: Vec<ActivityEvent>,
    since_snapshot: u64,
}

pub struct Workspace {
    id: WorkspaceId,
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<WorkspaceState>>,
}

impl Workspace {
    fn new(replayed: Replayed) -> Self {
        let snapshot = Arc::new(replayed.state.clone());
        Self {
            id: replayed.state.workspace.clone(),
            writer: Mutex::new(Writer { state: replayed.state, events: replayed.events, since_snapshot: 0 }),
            snapshot: RwLock::new(snapshot),
        }
    }

    pub fn id(&self) -> &WorkspaceId {
        &self.id
    }

    pub fn snapshot(&self) -> Arc<WorkspaceState> {
        self.snapshot.read().clone()
    }
}

/// Exclusive access to one workspace's writer.
pub struct Transaction<'a> {
    repo: &'a Repository,
    workspace: &'a Workspace,
    writer: &'a mut Writer,
}

impl Transaction<'_> {
    pub fn workspace(&self) -> &WorkspaceId {
        &self.workspace.id
    }

    pub fn state(&self) -> &WorkspaceState {
        &self.writer.state
    }

    /// Events with seq greater than `seq`.
    pub fn events_after(&self, seq: u64) -> &[ActivityEvent] {
        let start = (seq as usize).min(self.writer.events.len());
        &self.writer.events[start..]
    }

    /// Current time, never earlier than the last committed event.
    pub fn now(&self) -> DateTime<Utc> {
        let now = Utc::now();
        match self.writer.state.last_timestamp {
            Some(last) if last > now => last,
            _ => now,
        }
    }

    /// Durably appends one event and folds it into the state. On storage
    /// failure nothing changes.
    pub fn commit(&mut self, actor: &UserId, payload: EventPayload) -> Result<ActivityEvent, RepoError> {
        let seq = self.writer.state.last_seq + 1;
        let event = ActivityEvent::new(seq, actor.clone(), self.workspace.id.clone(), payload, self.now());
        self.repo.storage.append(&self.workspace.id, encode_event(&event).as_bytes())?;

        self.writer.state.apply(&event);
        self.writer.events.push(event.clone());
        self.repo.index_event(&event);
        *self.workspace.snapshot.write() = Arc::new(self.writer.state.clone());

        self.writer.since_snapshot += 1;
        let interval = self.repo.config.snapshot_interval;
        if interval > 0 && self.writer.since_snapshot >= interval {
            if let Err(e) = self.repo.write_snapshot_file(&self.workspace.id, &self.writer.state) {
                tracing::warn!(workspace = %self.workspace.id, "snapshot write failed: {e}");
            }
            self.writer.since_snapshot = 0;
        }

        if let Some(listener) = self.repo.listener.read().as_ref().and_then(Weak::upgrade) {
            listener.on_commit(&event);
        }
        Ok(event)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub workspace: WorkspaceId,
    pub problem: ProblemDefinition,
    pub score: f64,
    /// Documents captured in the problem's workspace.
    pub documents: Vec<DocumentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub user: UserId,
    pub affinity: f64,
    pub online: bool,
}

/// Search and capture history of a workspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub queries: Vec<QueryRecord>,
    pub visits: Vec<VisitRecord>,
}

#[derive(Default)]
struct Index {
    problems: HashMap<ProblemId, WorkspaceId>,
    documents: HashMap<DocumentId, WorkspaceId>,
}

impl Index {
    fn add(&mut self, event: &ActivityEvent) {
        let ws = &event.workspace;
        match &event.payload {
            EventPayload::ProblemEdit { problem, .. } => {
                self.problems.insert(problem.id, ws.clone());
            }
            EventPayload::AnnotationAdded { revisions, .. } => {
                for p in revisions {
                    self.problems.insert(p.id, ws.clone());
                }
            }
            EventPayload::DocumentOpened { document, .. } => {
                self.documents.insert(document.id, ws.clone());
            }
            _ => {}
        }
    }
}

pub struct Repository {
    storage: Arc<dyn Storage>,
    config: RepositoryConfig,
    workspaces: RwLock<BTreeMap<WorkspaceId, Arc<Workspace>>>,
    index: RwLock<Index>,
    listener: RwLock<Option<Weak<dyn CommitListener>>>,
}

impl Repository {
    /// Loads every workspace by replaying its log.
    pub fn open(storage: Arc<dyn Storage>, config: RepositoryConfig, recovery: Recovery) -> Result<Self, RepoError> {
        let mut workspaces = BTreeMap::new();
        let mut index = Index::default();
        for id in storage.workspaces()? {
            let bytes = storage.read_log(&id)?;
            let replayed = match replay(&id, &bytes) {
                Ok(r) => r,
                Err(corrupt)
                    if recovery == Recovery::TruncateTornTail && !bytes[corrupt.offset as usize..].contains(&b'\n') =>
                {
                    tracing::warn!(workspace = %id, offset = corrupt.offset, "truncating torn log tail");
                    storage.truncate_log(&id, corrupt.offset)?;
                    replay(&id, &bytes[..corrupt.offset as usize])
                        .map_err(|source| RepoError::CorruptLog { workspace: id.clone(), source })?
                }
                Err(source) => return Err(RepoError::CorruptLog { workspace: id.clone(), source }),
            };
            for event in &replayed.events {
                index.add(event);
            }
            workspaces.insert(id, Arc::new(Workspace::new(replayed)));
        }
        Ok(Self {
            storage,
            config,
            workspaces: RwLock::new(workspaces),
            index: RwLock::new(index),
            listener: RwLock::new(None),
        })
    }

    pub fn in_memory(config: RepositoryConfig) -> Self {
        Self::open(Arc::new(MemoryStorage::new()), config, Recovery::Strict).expect("empty storage opens")
    }

    pub fn config(&self) -> &RepositoryConfig {
        &self.config
    }

    pub fn storage(&self) -> &Arc<dyn Storage> {
        &self.storage
    }

    pub fn set_listener(&self, listener: Weak<dyn CommitListener>) {
        *self.listener.write() = Some(listener);
    }

    fn index_event(&self, event: &ActivityEvent) {
        self.index.write().add(event);
    }

    pub fn workspace_ids(&self) -> Vec<WorkspaceId> {
        self.workspaces.read().keys().cloned().collect()
    }

    pub fn workspace(&self, id: &WorkspaceId) -> Result<Arc<Workspace>, RepoError> {
        self.workspaces.read().get(id).cloned().ok_or_else(|| RepoError::UnknownWorkspace(id.clone()))
    }

    pub fn create_workspace(&self, id: &WorkspaceId) -> Result<Arc<Workspace>, RepoError> {
        let mut map = self.workspaces.write();
        if map.contains_key(id) {
            return Err(RepoError::WorkspaceExists(id.clone()));
        }
        self.storage.create(id)?;
        let ws = Arc::new(Workspace::new(Replayed {
            events: Vec::new(),
            state: WorkspaceState::empty(id.clone()),
            valid_len: 0,
        }));
        map.insert(id.clone(), ws.clone());
        Ok(ws)
    }

    /// Returns the workspace, creating it when absent.
    pub fn ensure_workspace(&self, id: &WorkspaceId) -> Result<Arc<Workspace>, RepoError> {
        match self.create_workspace(id) {
            Err(RepoError::WorkspaceExists(_)) => self.workspace(id),
            other => other,
        }
    }

    pub fn snapshot(&self, id: &WorkspaceId) -> Result<Arc<WorkspaceState>, RepoError> {
        Ok(self.workspace(id)?.snapshot())
    }

    pub fn events(&self, id: &WorkspaceId) -> Result<Vec<ActivityEvent>, RepoError> {
        Ok(self.workspace(id)?.writer.lock().events.clone())
    }

    /// Runs `f` holding the workspace's writer.
    pub fn transact<T, E: From<RepoError>>(
        &self,
        id: &WorkspaceId,
        f: impl FnOnce(&mut Transaction<'_>) -> Result<T, E>,
    ) -> Result<T, E> {
        let workspace = self.workspace(id)?;
        let mut writer = workspace.writer.lock();
        let mut tx = Transaction { repo: self, workspace: &workspace, writer: &mut writer };
        f(&mut tx)
    }

    /// Appends one event, assigning the next seq.
    pub fn append_event(
        &self,
        id: &WorkspaceId,
        actor: &UserId,
        payload: EventPayload,
    ) -> Result<ActivityEvent, RepoError> {
        self.transact(id, |tx| tx.commit(actor, payload))
    }

    /// Re-reads the workspace log from storage and folds it.
    pub fn replay(&self, id: &WorkspaceId) -> Result<WorkspaceState, RepoError> {
        let bytes = self.storage.read_log(id)?;
        replay(id, &bytes).map(|r| r.state).map_err(|source| RepoError::CorruptLog { workspace: id.clone(), source })
    }

    fn write_snapshot_file(&self, id: &WorkspaceId, state: &WorkspaceState) -> io::Result<()> {
        let file = SnapshotFile { seq: state.last_seq, state: state.clone() };
        let bytes = serde_json::to_vec(&file).map_err(io::Error::other)?;
        self.storage.write_snapshot(id, &bytes)
    }

    /// Writes a snapshot file for every workspace.
    pub fn write_snapshots(&self) -> Result<(), RepoError> {
        for ws in self.workspaces.read().values() {
            let writer = ws.writer.lock();
            self.write_snapshot_file(&ws.id, &writer.state)?;
        }
        Ok(())
    }

    fn problem_workspace(&self, id: &ProblemId) -> Option<WorkspaceId> {
        self.index.read().problems.get(id).cloned()
    }

    fn document_workspace(&self, id: &DocumentId) -> Option<WorkspaceId> {
        self.index.read().documents.get(id).cloned()
    }

    pub fn problem(&self, id: &ProblemId) -> Result<(WorkspaceId, ProblemDefinition), RepoError> {
        let ws = self.problem_workspace(id).ok_or(RepoError::UnknownProblem(*id))?;
        let problem = self.snapshot(&ws)?.problems.get(id).cloned().ok_or(RepoError::UnknownProblem(*id))?;
        Ok((ws, problem))
    }

    pub fn document(&self, id: &DocumentId) -> Result<(WorkspaceId, DocumentRecord), RepoError> {
        let ws = self.document_workspace(id).ok_or(RepoError::UnknownDocument(*id))?;
        let doc = self.snapshot(&ws)?.documents.get(id).cloned().ok_or(RepoError::UnknownDocument(*id))?;
        Ok((ws, doc))
    }

    /// Starts a new top-level problem, which becomes the workspace's active
    /// problem. `initial` is applied in the same revision.
    pub fn create_problem(
        &self,
        workspace: &WorkspaceId,
        statement: &str,
        objective: &str,
        author: &UserId,
        initial: &ProblemPatch,
    ) -> Result<(ProblemDefinition, ActivityEvent), RepoError> {
        self.transact(workspace, |tx| {
            let now = tx.now();
            let problem = ProblemDefinition::new(statement, objective, now)?.revised(initial, now)?;
            let event = tx.commit(
                author,
                EventPayload::ProblemEdit { change: ProblemChange::Created, problem: problem.clone() },
            )?;
            Ok((problem, event))
        })
    }

    pub fn revise_problem(
        &self,
        id: &ProblemId,
        patch: &ProblemPatch,
        author: &UserId,
    ) -> Result<(ProblemDefinition, ActivityEvent), RepoError> {
        let ws = self.problem_workspace(id).ok_or(RepoError::UnknownProblem(*id))?;
        self.transact(&ws, |tx| {
            let current = tx.state().problems.get(id).ok_or(RepoError::UnknownProblem(*id))?;
            let next = current.revised(patch, tx.now())?;
            let event =
                tx.commit(author, EventPayload::ProblemEdit { change: ProblemChange::Revised, problem: next.clone() })?;
            Ok((next, event))
        })
    }

    /// Decomposes `parent`: the child is created and linked, and the
    /// decomposition is recorded as a sub-problem annotation on the parent.
    pub fn add_sub_problem(
        &self,
        parent: &ProblemId,
        statement: &str,
        author: &UserId,
    ) -> Result<(ProblemDefinition, ActivityEvent), RepoError> {
        let ws = self.problem_workspace(parent).ok_or(RepoError::UnknownParent(*parent))?;
        self.transact(&ws, |tx| {
            let now = tx.now();
            let mut parent_rev = tx.state().problems.get(parent).cloned().ok_or(RepoError::UnknownParent(*parent))?;
            let child = ProblemDefinition::new(statement, "", now)?;
            parent_rev.add_sub_problem(child.id)?;
            parent_rev.touch(now);
            let annotation = AnnotationRecord::new(
                author.clone(),
                EntityRef::Problem(*parent),
                &child.statement,
                AnnotationKind::SubProblemProposal,
                now,
            )?;
            let event = tx.commit(
                author,
                EventPayload::AnnotationAdded { annotation, revisions: vec![parent_rev, child.clone()] },
            )?;
            Ok((child, event))
        })
    }

    pub fn annotate(
        &self,
        target: EntityRef,
        body: &str,
        kind: AnnotationKind,
        author: &UserId,
    ) -> Result<(AnnotationRecord, ActivityEvent), RepoError> {
        let ws = match target {
            EntityRef::Problem(id) => self.problem_workspace(&id),
            EntityRef::Document(id) => self.document_workspace(&id),
        }
        .ok_or(RepoError::UnknownTarget(target))?;
        self.transact(&ws, |tx| {
            let now = tx.now();
            let annotation = AnnotationRecord::new(author.clone(), target, body, kind, now)?;
            let mut revisions = Vec::new();
            match target {
                EntityRef::Problem(id) => {
                    let mut p = tx.state().problems.get(&id).cloned().ok_or(RepoError::UnknownTarget(target))?;
                    p.touch(now);
                    revisions.push(p);
                }
                EntityRef::Document(id) => {
                    if !tx.state().documents.contains_key(&id) {
                        return Err(RepoError::UnknownTarget(target));
                    }
                }
            }
            let event =
                tx.commit(author, EventPayload::AnnotationAdded { annotation: annotation.clone(), revisions })?;
            Ok((annotation, event))
        })
    }

    fn document_event(
        &self,
        document: &DocumentId,
        actor: &UserId,
        payload: EventPayload,
    ) -> Result<ActivityEvent, RepoError> {
        let ws = self.document_workspace(document).ok_or(RepoError::UnknownDocument(*document))?;
        self.transact(&ws, |tx| {
            if !tx.state().documents.contains_key(document) {
                return Err(RepoError::UnknownDocument(*document));
            }
            tx.commit(actor, payload)
        })
    }

    fn non_empty(text: &str) -> Result<String, RepoError> {
        let text = text.trim();
        if text.is_empty() {
            Err(KnowledgeError::EmptyBody.into())
        } else {
            Ok(text.to_string())
        }
    }

    pub fn tag_document(&self, document: &DocumentId, tag: &str, actor: &UserId) -> Result<ActivityEvent, RepoError> {
        let tag = Self::non_empty(tag)?;
        self.document_event(document, actor, EventPayload::TagAdded { document: *document, tag })
    }

    pub fn add_metadata(
        &self,
        document: &DocumentId,
        key: &str,
        value: &str,
        actor: &UserId,
    ) -> Result<ActivityEvent, RepoError> {
        let key = Self::non_empty(key)?;
        let payload = EventPayload::MetadataAdded { document: *document, key, value: value.to_string() };
        self.document_event(document, actor, payload)
    }

    pub fn classify_document(
        &self,
        document: &DocumentId,
        class: &str,
        actor: &UserId,
    ) -> Result<ActivityEvent, RepoError> {
        let class = Self::non_empty(class)?;
        self.document_event(document, actor, EventPayload::ClassificationAdded { document: *document, class })
    }

    /// Returns the search history and records that `actor` consulted it.
    pub fn view_history(&self, workspace: &WorkspaceId, actor: &UserId) -> Result<(History, ActivityEvent), RepoError> {
        self.transact(workspace, |tx| {
            let history = History { queries: tx.state().queries.clone(), visits: tx.state().visits.clone() };
            let event = tx.commit(actor, EventPayload::HistoryViewed {})?;
            Ok((history, event))
        })
    }

    pub fn reports_for_problem(&self, id: &ProblemId) -> Result<Vec<IndicatorReport>, RepoError> {
        let (ws, _) = self.problem(id)?;
        let snapshot = self.snapshot(&ws)?;
        Ok(snapshot.reports.get(id).map(|m| m.values().cloned().collect()).unwrap_or_default())
    }

    pub fn problem_similarity(&self, a: &ProblemDefinition, b: &ProblemDefinition) -> SimilarityScore {
        problem_similarity(a, b, &self.config.weights)
    }

    fn all_snapshots(&self) -> Vec<Arc<WorkspaceState>> {
        self.workspaces.read().values().map(|w| w.snapshot()).collect()
    }

    /// Ranks every stored problem against a free-text query.
    pub fn search(&self, query: &str, limit: usize) -> Vec<SearchHit> {
        let snapshots = self.all_snapshots();
        let owner: HashMap<ProblemId, &WorkspaceState> =
            snapshots.iter().flat_map(|s| s.problems.keys().map(move |id| (*id, s.as_ref()))).collect();
        similarity::search::<f64>(snapshots.iter().flat_map(|s| s.problems.values()), query, limit)
            .into_iter()
            .map(|(problem, score)| {
                let ws = owner[&problem.id];
                SearchHit {
                    workspace: ws.workspace.clone(),
                    problem: problem.clone(),
                    score,
                    documents: ws.documents.keys().copied().collect(),
                }
            })
            .collect()
    }

    /// Suggests users who worked on past problems similar to `current`.
    pub fn recommend_collaborators(
        &self,
        current: &ProblemId,
        k: usize,
        presence: &dyn PresenceOracle,
    ) -> Result<Vec<Recommendation>, RepoError> {
        let (ws, problem) = self.problem(current)?;
        let snapshots = self.all_snapshots();
        let empty = BTreeSet::new();
        let exclude = snapshots.iter().find(|s| s.workspace == ws).map(|s| &s.participants).unwrap_or(&empty);
        let past = snapshots
            .iter()
            .flat_map(|s| s.problems.values().map(move |p| PastProblem { problem: p, participants: &s.participants }));
        let ranked = similarity::recommend(&problem, exclude, past, &self.config.weights, self.config.threshold, k);
        Ok(ranked
            .into_iter()
            .map(|(user, affinity)| Recommendation { online: presence.is_online(&user), user, affinity })
            .collect())
    }
}

/// Summary of one replayed workspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceSummary {
    pub workspace: WorkspaceId,
    pub problem_count: usize,
    pub event_count: u64,
    pub tally: ProcessTally,
    pub snapshot_seq: Option<u64>,
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Corrupt(#[from] CorruptLog),
    #[error("snapshot at seq {seq} does not match replay")]
    SnapshotMismatch { seq: u64 },
    #[error("unreadable snapshot: {0}")]
    SnapshotUnreadable(String),
    #[error("storage failure: {0}")]
    Storage(#[from] io::Error),
}

/// Replays a workspace log strictly and cross-checks its snapshot file.
pub fn verify_workspace(storage: &dyn Storage, id: &WorkspaceId) -> Result<WorkspaceSummary, VerifyError> {
    let bytes = storage.read_log(id)?;
    let replayed = replay(id, &bytes)?;
    let snapshot_seq = match storage.read_snapshot(id)? {
        None => None,
        Some(raw) => {
            let file: SnapshotFile =
                serde_json::from_slice(&raw).map_err(|e| VerifyError::SnapshotUnreadable(e.to_string()))?;
            if file.seq > replayed.state.last_seq || fold_prefix(id, &replayed.events, file.seq as usize) != file.state
            {
                return Err(VerifyError::SnapshotMismatch { seq: file.seq });
            }
            Some(file.seq)
        }
    };
    Ok(WorkspaceSummary {
        workspace: id.clone(),
        problem_count: replayed.state.problems.len(),
        event_count: replayed.state.event_count(),
        tally: replayed.state.tally,
        snapshot_seq,
    })
}
