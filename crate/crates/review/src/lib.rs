//! Verification and human-evaluation service for generated QA corpora.
//!
//! [`Store`] keeps verdicts and human answers in an append-only log and
//! derives item status, exports and QC statistics from it. [`router`] exposes
//! the store over HTTP.

pub mod api;
pub mod config;
pub mod store;

use std::io::BufReader;
use std::sync::Arc;

pub use api::{router, AppState, Shared, ANNOTATOR_HEADER};
pub use config::{ConfigError, ServiceConfig};
pub use store::{
    CriterionFlags, HumanAnswer, ItemStatus, LogEvent, QcStats, QueueKind, QueuePage, QueueQuery,
    ReviewError, Store, Target, Verdict, VerificationRecord,
};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("reading {path}: {message}")]
    Input { path: String, message: String },
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error("binding {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("server: {0}")]
    Server(std::io::Error),
}

/// Loads the corpus, scenes and verdict log named by `config`.
pub fn open_store(config: &ServiceConfig) -> Result<Store, ServeError> {
    let input = |path: &std::path::Path, message: String| ServeError::Input {
        path: path.display().to_string(),
        message,
    };
    let corpus = std::fs::File::open(&config.corpus_path)
        .map_err(|e| input(&config.corpus_path, e.to_string()))?;
    let items = sceneqa::qa::corpus::read_jsonl(BufReader::new(corpus))
        .map_err(|e| input(&config.corpus_path, e.to_string()))?;
    let text = std::fs::read_to_string(&config.scenes_path)
        .map_err(|e| input(&config.scenes_path, e.to_string()))?;
    let scenes = sceneqa::schema::parse_canonical_lines(&text)
        .map_err(|e| input(&config.scenes_path, e.to_string()))?;
    Ok(Store::open(items, scenes, config.quorum, &config.log_path)?
        .with_edits_pass(config.edits_pass))
}

pub fn app_state(store: Store, config: ServiceConfig) -> Shared {
    Arc::new(AppState {
        store: tokio::sync::RwLock::new(store),
        config,
    })
}

/// Serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let store = open_store(&config)?;
    let addr = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: addr.clone(),
            source,
        })?;
    eprintln!(
        "review service listening on http://{}",
        listener.local_addr().map_err(ServeError::Server)?
    );
    axum::serve(listener, router(app_state(store, config)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServeError::Server)
}
