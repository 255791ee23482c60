//! JSON-over-HTTP facade: dataset ingest, rule deployment, queries,
//! inference, ontology metrics, streaming benchmarks and diagnosis
//! sessions.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use liverkg::dss::TextRefiner;
use liverkg::rules::builtin::diagnostic_rules;
use liverkg::rules::Rule;
use liverkg::store::Graph;
use liverkg::stream::StreamEngine;

mod api;
pub mod error;
pub mod persist;
pub mod textgen;

pub use api::router;
pub use error::{ApiError, ErrorCode};
pub use persist::{graph_id, DataDir, PersistError, SessionJournal, SessionSlot, Snapshot};

#[derive(Debug, Clone)]
pub struct Config {
    pub bind: SocketAddr,
    pub data_dir: Option<PathBuf>,
}

impl Config {
    /// `BIND_ADDR` (default 127.0.0.1:8080) and `DATA_DIR` (in-memory
    /// only when unset).
    pub fn from_env() -> Result<Self, String> {
        let bind = std::env::var("BIND_ADDR").unwrap_or_else(|_| "127.0.0.1:8080".into());
        Ok(Config {
            bind: bind
                .parse()
                .map_err(|e| format!("BIND_ADDR {bind:?}: {e}"))?,
            data_dir: std::env::var_os("DATA_DIR").map(PathBuf::from),
        })
    }
}

type SessionHandle = Arc<tokio::sync::Mutex<SessionSlot>>;

pub struct AppState {
    data: Option<DataDir>,
    graphs: RwLock<BTreeMap<String, Arc<Graph>>>,
    engine: StreamEngine,
    // serializes rule deploys with their persistence
    rules_write: Mutex<()>,
    sessions: Mutex<BTreeMap<String, SessionHandle>>,
    next_session: AtomicU64,
    diagnostic_rules: Vec<Rule>,
    refiner: Option<Arc<dyn TextRefiner + Send + Sync>>,
}

impl AppState {
    /// Fresh in-memory state.
    pub fn in_memory() -> Self {
        AppState {
            data: None,
            graphs: RwLock::default(),
            engine: StreamEngine::new(),
            rules_write: Mutex::new(()),
            sessions: Mutex::default(),
            next_session: AtomicU64::new(1),
            diagnostic_rules: diagnostic_rules(),
            refiner: None,
        }
    }

    /// State backed by `dir`, reloading whatever it already holds.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, PersistError> {
        let data = DataDir::open(dir)?;
        let mut state = AppState::in_memory();
        let snap = data.load(&state.diagnostic_rules)?;
        state.graphs = RwLock::new(
            snap.graphs
                .into_iter()
                .map(|(id, g)| (id, Arc::new(g)))
                .collect(),
        );
        for rule in snap.rules {
            state
                .engine
                .deploy_rule(rule)
                .map_err(|e| PersistError::Corrupt {
                    path: data.root().join("rules.swl"),
                    message: e.to_string(),
                })?;
        }
        state.sessions = Mutex::new(
            snap.sessions
                .into_iter()
                .map(|(id, slot)| (id, Arc::new(tokio::sync::Mutex::new(slot))))
                .collect(),
        );
        state.data = Some(data);
        Ok(state)
    }

    pub fn with_refiner(mut self, refiner: Arc<dyn TextRefiner + Send + Sync>) -> Self {
        self.refiner = Some(refiner);
        self
    }

    pub fn engine(&self) -> &StreamEngine {
        &self.engine
    }

    pub fn graph(&self, id: &str) -> Option<Arc<Graph>> {
        self.graphs
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
    }

    pub fn graph_ids(&self) -> Vec<String> {
        self.graphs
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    /// Stores a graph under its content id; re-adding is a no-op.
    pub fn add_graph(&self, graph: Graph) -> Result<(String, bool), PersistError> {
        let id = graph_id(&graph);
        if self.graph(&id).is_some() {
            return Ok((id, false));
        }
        if let Some(data) = &self.data {
            data.save_graph(&id, &graph)?;
        }
        let mut graphs = self.graphs.write().unwrap_or_else(|e| e.into_inner());
        let created = graphs.insert(id.clone(), Arc::new(graph)).is_none();
        Ok((id, created))
    }

    fn session(&self, id: &str) -> Option<SessionHandle> {
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    /// Current value of a session, for tests and export.
    pub async fn session_slot(&self, id: &str) -> Option<SessionSlot> {
        let handle = self.session(id)?;
        let slot = handle.lock().await;
        Some(slot.clone())
    }
}

/// Binds and serves until the process is stopped.
pub async fn serve(config: Config) -> Result<(), String> {
    let mut state = match &config.data_dir {
        Some(dir) => AppState::open(dir).map_err(|e| format!("data directory: {e}"))?,
        None => AppState::in_memory(),
    };
    if let Some(refiner) = textgen::RemoteRefiner::from_env() {
        state = state.with_refiner(Arc::new(refiner));
    }
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|e| format!("bind {}: {e}", config.bind))?;
    eprintln!("listening on {}", config.bind);
    axum::serve(listener, router(Arc::new(state)))
        .await
        .map_err(|e| e.to_string())
}

fn next_session_id(state: &AppState) -> String {
    format!("s{}", state.next_session.fetch_add(1, Ordering::Relaxed))
}
