//! Live collaboration: membership, presence, awareness broadcast, one-shot
//! view synchronization and instant messaging.
//!
//! The repository's per-workspace writer is the sequencer. Every activity is
//! logged first and then fanned out from inside the writer's critical
//! section, so all members observe the same seq order. Membership changes
//! also run under the writer, which pins a joiner's high-water mark exactly.
//! A member whose outbound queue is full is disconnected instead of slowing
//! the sequencer down.

pub mod protocol;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Weak};
use std::time::{Duration, Instant};

use chrono::Utc;
use parking_lot::Mutex;
use thiserror::Error;
use tokio::sync::mpsc;
use url::Url;

use crate::analyzer::analyze_document;
use crate::fetcher::{DocumentSource, FetchResult, FetchStatus};
use crate::knowledge::{
    ActivityEvent, DocumentId, DocumentRecord, EventPayload, FetchSummary, KnowledgeError, UserId, WorkspaceId,
};
use crate::repository::{CommitListener, PresenceOracle, RepoError, Repository, Transaction};
use crate::IndicatorReport;

pub use protocol::{
    AwarenessUpdate, ClientMessage, Empty, Presence, PresenceChange, PresenceUpdate, ProtocolError, RecentQuery,
    ServerMessage, SessionState,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("`{0}` is not a member of this workspace")]
    NotAMember(UserId),
    #[error("message body is empty")]
    EmptyBody,
    #[error("`{0}` has no current document")]
    LeaderHasNoDocument(UserId),
    #[error("invalid document url `{0}`")]
    InvalidUrl(String),
    #[error(transparent)]
    Repo(#[from] RepoError),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::NotAMember(_) => "not_a_member",
            SessionError::EmptyBody => "empty_body",
            SessionError::LeaderHasNoDocument(_) => "leader_has_no_document",
            SessionError::InvalidUrl(_) => "invalid_url",
            SessionError::Repo(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// Per-user bound on `recent_queries`.
    pub recent_queries: usize,
    /// A member silent for longer than this is dropped by [`SessionEngine::reap_idle`].
    pub heartbeat_timeout: Duration,
    /// Outbound queue length per connection.
    pub outbound_capacity: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { recent_queries: 50, heartbeat_timeout: Duration::from_secs(30), outbound_capacity: 1024 }
    }
}

pub type ConnectionId = u64;

/// A joined member's end of the connection.
#[derive(Debug)]
pub struct Subscription {
    pub workspace: WorkspaceId,
    pub user: UserId,
    pub connection: ConnectionId,
    /// State at the join point; also the first message on `receiver`.
    pub state: SessionState,
    pub receiver: mpsc::Receiver<ServerMessage>,
}

/// Result of opening a document.
#[derive(Debug, Clone)]
pub struct OpenedDocument {
    pub document: DocumentRecord,
    pub report: Option<IndicatorReport>,
    /// `None` when an existing record was reused without fetching.
    pub fetch: Option<FetchSummary>,
    pub event: ActivityEvent,
}

struct Member {
    sender: mpsc::Sender<ServerMessage>,
    connection: ConnectionId,
    last_seen: Instant,
}

#[derive(Default)]
struct Hub {
    members: BTreeMap<UserId, Member>,
    seen: BTreeSet<UserId>,
}

impl Hub {
    /// Delivers `message` to every member except `skip`. Members that cannot
    /// take it are removed, and the rest are told they left.
    fn fanout(&mut self, message: &ServerMessage, skip: Option<&UserId>, high_water: u64) {
        let mut dropped = Vec::new();
        for (user, member) in &self.members {
            if Some(user) == skip {
                continue;
            }
            if member.sender.try_send(message.clone()).is_err() {
                dropped.push(user.clone());
            }
        }
        while let Some(user) = dropped.pop() {
            if self.members.remove(&user).is_none() {
                continue;
            }
            tracing::info!(%user, "dropping unresponsive member");
            let left = left_message(&user, high_water);
            for (other, member) in &self.members {
                if member.sender.try_send(left.clone()).is_err() && !dropped.contains(other) {
                    dropped.push(other.clone());
                }
            }
        }
    }
}

fn presence_message(user: &UserId, kind: PresenceChange, high_water: u64) -> ServerMessage {
    ServerMessage::update(AwarenessUpdate::Presence(PresenceUpdate {
        seq: high_water,
        actor: user.clone(),
        kind,
        timestamp: Utc::now(),
    }))
}

fn left_message(user: &UserId, high_water: u64) -> ServerMessage {
    presence_message(user, PresenceChange::Left, high_water)
}

pub struct SessionEngine {
    repo: Arc<Repository>,
    source: Arc<dyn DocumentSource>,
    config: SessionConfig,
    hubs: Mutex<HashMap<WorkspaceId, Hub>>,
    next_connection: AtomicU64,
}

impl SessionEngine {
    /// Creates the engine and subscribes it to the repository's commits.
    pub fn new(repo: Arc<Repository>, source: Arc<dyn DocumentSource>, config: SessionConfig) -> Arc<Self> {
        let engine = Arc::new(Self {
            repo,
            source,
            config,
            hubs: Mutex::new(HashMap::new()),
            next_connection: AtomicU64::new(1),
        });
        let weak: Weak<SessionEngine> = Arc::downgrade(&engine);
        engine.repo.set_listener(weak);
        engine
    }

    pub fn repository(&self) -> &Arc<Repository> {
        &self.repo
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    fn build_state(
        &self,
        workspace: &WorkspaceId,
        tx_state: &crate::repository::WorkspaceState,
        hub: Option<&Hub>,
    ) -> SessionState {
        let members: BTreeSet<UserId> = hub.map(|h| h.members.keys().cloned().collect()).unwrap_or_default();
        let mut presence: BTreeMap<UserId, Presence> = tx_state
            .participants
            .iter()
            .chain(hub.into_iter().flat_map(|h| h.seen.iter()))
            .map(|u| (u.clone(), Presence::Offline))
            .collect();
        for user in &members {
            presence.insert(user.clone(), Presence::Online);
        }

        let mut recent_queries: BTreeMap<UserId, Vec<RecentQuery>> = BTreeMap::new();
        for q in tx_state.queries.iter().rev() {
            let list = recent_queries.entry(q.actor.clone()).or_default();
            if list.len() < self.config.recent_queries {
                list.push(RecentQuery { query: q.query.clone(), source: q.source.clone(), timestamp: q.timestamp });
            }
        }
        for list in recent_queries.values_mut() {
            list.reverse();
        }

        SessionState {
            workspace: workspace.clone(),
            members,
            presence,
            current_document: tx_state.current_document.clone(),
            recent_queries,
            active_problem: tx_state.active_problem().map(|p| p.id),
            high_water: tx_state.last_seq,
        }
    }

    /// Current live state of a workspace.
    pub fn session_state(&self, workspace: &WorkspaceId) -> Result<SessionState, SessionError> {
        Ok(self.repo.transact(workspace, |tx| {
            let hubs = self.hubs.lock();
            Ok::<_, RepoError>(self.build_state(workspace, tx.state(), hubs.get(workspace)))
        })?)
    }

    /// Joins (creating the workspace on first use). With `since`, logged
    /// events after that seq are replayed to the joiner before live updates.
    pub fn join(
        &self,
        workspace: &WorkspaceId,
        user: &UserId,
        since: Option<u64>,
    ) -> Result<Subscription, SessionError> {
        self.repo.ensure_workspace(workspace)?;
        self.repo.transact(workspace, |tx| {
            let high_water = tx.state().last_seq;
            let (sender, receiver) = mpsc::channel(self.config.outbound_capacity.max(2));
            let connection = self.next_connection.fetch_add(1, Ordering::Relaxed);

            let mut hubs = self.hubs.lock();
            let hub = hubs.entry(workspace.clone()).or_default();
            hub.members.insert(user.clone(), Member { sender: sender.clone(), connection, last_seen: Instant::now() });
            hub.seen.insert(user.clone());
            let state = self.build_state(workspace, tx.state(), Some(hub));

            let _ = sender.try_send(ServerMessage::State { seq: high_water, payload: state.clone() });
            if let Some(since) = since.filter(|s| *s < high_water) {
                let backlog = tx.events_after(since);
                if backlog.len() < self.config.outbound_capacity {
                    for event in backlog {
                        let _ = sender.try_send(ServerMessage::update(AwarenessUpdate::Activity(event.clone())));
                    }
                }
            }
            hub.fanout(&presence_message(user, PresenceChange::Joined, high_water), Some(user), high_water);

            Ok(Subscription { workspace: workspace.clone(), user: user.clone(), connection, state, receiver })
        })
    }

    fn require_member(&self, workspace: &WorkspaceId, user: &UserId) -> Result<(), SessionError> {
        let mut hubs = self.hubs.lock();
        match hubs.get_mut(workspace).and_then(|h| h.members.get_mut(user)) {
            Some(member) => {
                member.last_seen = Instant::now();
                Ok(())
            }
            None => Err(SessionError::NotAMember(user.clone())),
        }
    }

    fn commit_as_member(
        &self,
        workspace: &WorkspaceId,
        user: &UserId,
        payload: EventPayload,
    ) -> Result<ActivityEvent, SessionError> {
        self.repo.transact(workspace, |tx| {
            self.require_member(workspace, user)?;
            Ok(tx.commit(user, payload)?)
        })
    }

    pub fn submit_query(
        &self,
        workspace: &WorkspaceId,
        user: &UserId,
        query: &str,
        source: &str,
    ) -> Result<ActivityEvent, SessionError> {
        let query = query.trim();
        if query.is_empty() {
            return Err(SessionError::EmptyBody);
        }
        let payload = EventPayload::QuerySubmitted { query: query.to_string(), source: source.trim().to_string() };
        self.commit_as_member(workspace, user, payload)
    }

    pub fn send_message(
        &self,
        workspace: &WorkspaceId,
        user: &UserId,
        body: &str,
    ) -> Result<ActivityEvent, SessionError> {
        if body.trim().is_empty() {
            return Err(SessionError::EmptyBody);
        }
        self.commit_as_member(workspace, user, EventPayload::ChatMessage { body: body.to_string() })
    }

    /// Points `follower` at the document `leader` is currently viewing. The
    /// follower does not keep tracking the leader afterwards.
    pub fn view_sync(
        &self,
        workspace: &WorkspaceId,
        follower: &UserId,
        leader: &UserId,
    ) -> Result<DocumentId, SessionError> {
        self.repo.transact(workspace, |tx| {
            self.require_member(workspace, follower)?;
            self.require_member(workspace, leader)?;
            let document = *tx
                .state()
                .current_document
                .get(leader)
                .ok_or_else(|| SessionError::LeaderHasNoDocument(leader.clone()))?;
            tx.commit(follower, EventPayload::ViewSync { leader: leader.clone(), document })?;
            Ok(document)
        })
    }

    /// Opens a document for `user`: reuses the workspace's record for the
    /// URL or fetches it, analyzes it against the active problem and
    /// broadcasts the visit.
    pub async fn open_document(
        &self,
        workspace: &WorkspaceId,
        user: &UserId,
        url: &str,
        title: &str,
    ) -> Result<OpenedDocument, SessionError> {
        let url = Url::parse(url.trim())
            .ok()
            .filter(|u| matches!(u.scheme(), "http" | "https") && u.has_host())
            .ok_or_else(|| SessionError::InvalidUrl(url.to_string()))?;
        self.require_member(workspace, user)?;

        let known = self.repo.snapshot(workspace)?.document_by_url(url.as_str()).is_some();
        let fetched = if known { None } else { Some(self.source.fetch(&url).await) };

        self.repo.transact(workspace, |tx| {
            self.require_member(workspace, user)?;
            self.record_open(tx, user, &url, title, fetched)
        })
    }

    fn record_open(
        &self,
        tx: &mut Transaction<'_>,
        user: &UserId,
        url: &Url,
        title: &str,
        fetched: Option<FetchResult>,
    ) -> Result<OpenedDocument, SessionError> {
        let (document, fetch) = match tx.state().document_by_url(url.as_str()) {
            Some(existing) => (existing.clone(), None),
            None => {
                let result = fetched.unwrap_or_else(|| FetchResult {
                    url: url.clone(),
                    status: FetchStatus::NetworkError,
                    title: String::new(),
                    text: String::new(),
                    byte_size: 0,
                });
                let ok = result.status.is_ok();
                let title = if title.trim().is_empty() { result.title.clone() } else { title.trim().to_string() };
                let document = DocumentRecord {
                    id: DocumentId::new(),
                    url: url.clone(),
                    title,
                    fetched_text: if ok { result.text } else { String::new() },
                    first_viewer: user.clone(),
                    timestamp: tx.now(),
                };
                (document, Some(FetchSummary { status: result.status, byte_size: result.byte_size }))
            }
        };
        let report: Option<IndicatorReport> = tx.state().active_problem().map(|p| analyze_document(&document, p));
        let event = tx.commit(
            user,
            EventPayload::DocumentOpened { document: document.clone(), fetch: fetch.clone(), report: report.clone() },
        )?;
        Ok(OpenedDocument { document, report, fetch, event })
    }

    /// Removes `user` from the live session. Query history is kept.
    pub fn leave(&self, workspace: &WorkspaceId, user: &UserId) -> Result<(), SessionError> {
        self.remove_member(workspace, user, None)?.then_some(()).ok_or_else(|| SessionError::NotAMember(user.clone()))
    }

    /// Like [`leave`](Self::leave) but only if `connection` is still the
    /// user's live connection; a no-op otherwise.
    pub fn disconnect(&self, workspace: &WorkspaceId, user: &UserId, connection: ConnectionId) {
        if let Err(e) = self.remove_member(workspace, user, Some(connection)) {
            tracing::debug!(%workspace, %user, "disconnect: {e}");
        }
    }

    fn remove_member(
        &self,
        workspace: &WorkspaceId,
        user: &UserId,
        connection: Option<ConnectionId>,
    ) -> Result<bool, SessionError> {
        Ok(self.repo.transact(workspace, |tx| {
            let high_water = tx.state().last_seq;
            let mut hubs = self.hubs.lock();
            let Some(hub) = hubs.get_mut(workspace) else { return Ok::<_, RepoError>(false) };
            let matches = hub.members.get(user).is_some_and(|m| connection.is_none_or(|c| m.connection == c));
            if !matches {
                return Ok(false);
            }
            hub.members.remove(user);
            hub.fanout(&left_message(user, high_water), None, high_water);
            Ok(true)
        })?)
    }

    /// Records liveness and returns the workspace high-water mark.
    pub fn heartbeat(&self, workspace: &WorkspaceId, user: &UserId) -> Result<u64, SessionError> {
        self.require_member(workspace, user)?;
        Ok(self.repo.snapshot(workspace)?.last_seq)
    }

    /// Drops members whose last activity is older than the heartbeat
    /// timeout as of `now`. Returns who was dropped.
    pub fn reap_idle(&self, now: Instant) -> Vec<(WorkspaceId, UserId)> {
        let workspaces: Vec<WorkspaceId> = self.hubs.lock().keys().cloned().collect();
        let timeout = self.config.heartbeat_timeout;
        let mut reaped = Vec::new();
        for workspace in workspaces {
            let result = self.repo.transact(&workspace, |tx| {
                let high_water = tx.state().last_seq;
                let mut hubs = self.hubs.lock();
                let Some(hub) = hubs.get_mut(&workspace) else { return Ok::<_, RepoError>(Vec::new()) };
                let stale: Vec<UserId> = hub
                    .members
                    .iter()
                    .filter(|(_, m)| now.saturating_duration_since(m.last_seen) > timeout)
                    .map(|(u, _)| u.clone())
                    .collect();
                for user in &stale {
                    hub.members.remove(user);
                    hub.fanout(&left_message(user, high_water), None, high_water);
                }
                Ok(stale)
            });
            if let Ok(stale) = result {
                reaped.extend(stale.into_iter().map(|u| (workspace.clone(), u)));
            }
        }
        reaped
    }

    pub fn members(&self, workspace: &WorkspaceId) -> BTreeSet<UserId> {
        self.hubs.lock().get(workspace).map(|h| h.members.keys().cloned().collect()).unwrap_or_default()
    }

    /// Executes one client message on behalf of a joined member. Join is
    /// handled by the transport because it creates the subscription.
    /// Returns a direct reply, if any; effects reach members as updates.
    pub async fn handle(
        &self,
        workspace: &WorkspaceId,
        user: &UserId,
        message: ClientMessage,
    ) -> Result<Option<ServerMessage>, SessionError> {
        match message {
            ClientMessage::Join { .. } => Ok(None),
            ClientMessage::Query { query, source } => self.submit_query(workspace, user, &query, &source).map(|_| None),
            ClientMessage::Open { url, title } => self.open_document(workspace, user, &url, &title).await.map(|_| None),
            ClientMessage::Sync { leader } => self.view_sync(workspace, user, &leader).map(|_| None),
            ClientMessage::Chat { body } => self.send_message(workspace, user, &body).map(|_| None),
            ClientMessage::Leave => self.leave(workspace, user).map(|_| None),
            ClientMessage::Heartbeat => {
                let seq = self.heartbeat(workspace, user)?;
                Ok(Some(ServerMessage::Heartbeat { seq, payload: Empty {} }))
            }
        }
    }
}

impl CommitListener for SessionEngine {
    fn on_commit(&self, event: &ActivityEvent) {
        let mut hubs = self.hubs.lock();
        if let Some(hub) = hubs.get_mut(&event.workspace) {
            hub.fanout(&ServerMessage::update(AwarenessUpdate::Activity(event.clone())), None, event.seq);
        }
    }
}

impl PresenceOracle for SessionEngine {
    fn is_online(&self, user: &UserId) -> bool {
        self.hubs.lock().values().any(|h| h.members.contains_key(user))
    }
}

impl From<KnowledgeError> for SessionError {
    fn from(e: KnowledgeError) -> Self {
        SessionError::Repo(RepoError::Knowledge(e))
    }
}
