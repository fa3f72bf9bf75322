//! Network service and operator CLI around `collab-ir-core`.
//!
//! See `api` for the HTTP endpoints, `ws` for the real-time transport and
//! `config` for the configuration format.

pub mod api;
pub mod cli;
pub mod config;
pub mod ws;

use std::future::Future;
use std::io;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::Router;
use collab_ir_core::fetcher::{DocumentSource, Fetcher};
use collab_ir_core::repository::{DirStorage, Recovery, RepoError, Repository};
use collab_ir_core::session::{SessionConfig, SessionEngine};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

pub use config::ServiceConfig;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("data directory {path} is not usable: {source}")]
    DataDir { path: String, source: io::Error },
    #[error(transparent)]
    Repo(#[from] RepoError),
    #[error("cannot build HTTP client: {0}")]
    Client(String),
    #[error("cannot listen on {address}: {source}")]
    Listen { address: String, source: io::Error },
}

/// Shared handles behind every request.
#[derive(Clone)]
pub struct Service {
    pub repo: Arc<Repository>,
    pub engine: Arc<SessionEngine>,
}

impl Service {
    pub fn new(repo: Arc<Repository>, source: Arc<dyn DocumentSource>, session: SessionConfig) -> Self {
        let engine = SessionEngine::new(repo.clone(), source, session);
        Self { repo, engine }
    }

    /// Opens the on-disk repository (repairing a torn final record) and
    /// the HTTP fetcher described by `config`.
    pub fn open(config: &ServiceConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let storage = DirStorage::open(&config.data_dir, config.fsync)
            .map_err(|source| ServiceError::DataDir { path: config.data_dir.display().to_string(), source })?;
        let repo = Repository::open(Arc::new(storage), config.repository.clone(), Recovery::TruncateTornTail)?;
        let fetcher = Fetcher::new(config.fetch.clone()).map_err(|e| ServiceError::Client(e.to_string()))?;
        Ok(Self::new(Arc::new(repo), Arc::new(fetcher), config.session.clone()))
    }

    pub fn router(&self) -> Router {
        api::router(self.clone())
    }

    /// Periodically drops members that stopped sending messages.
    pub fn spawn_reaper(&self) -> JoinHandle<()> {
        let engine = self.engine.clone();
        let period = (engine.config().heartbeat_timeout / 2).max(Duration::from_millis(10));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                for (workspace, user) in engine.reap_idle(Instant::now()) {
                    tracing::info!(%workspace, %user, "member timed out");
                }
            }
        })
    }

    /// Serves until `shutdown` resolves, then flushes snapshot files.
    pub async fn serve(
        self,
        listener: TcpListener,
        shutdown: impl Future<Output = ()> + Send + 'static,
    ) -> io::Result<()> {
        let reaper = self.spawn_reaper();
        let result = axum::serve(listener, self.router()).with_graceful_shutdown(shutdown).await;
        reaper.abort();
        if let Err(e) = self.repo.write_snapshots() {
            tracing::warn!("snapshot flush failed: {e}");
        }
        result
    }
}

/// Binds `config.listen_address` and serves until Ctrl-C.
pub async fn run(config: ServiceConfig) -> Result<(), ServiceError> {
    let service = Service::open(&config)?;
    let listener = TcpListener::bind(&config.listen_address)
        .await
        .map_err(|source| ServiceError::Listen { address: config.listen_address.clone(), source })?;
    tracing::info!(address = %config.listen_address, data_dir = %config.data_dir.display(), "serving");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    service
        .serve(listener, shutdown)
        .await
        .map_err(|source| ServiceError::Listen { address: config.listen_address.clone(), source })
}
