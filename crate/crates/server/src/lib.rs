//! HTTP facade over the detector, the pattern store and the alarm queue.
//!
//! Endpoints (JSON, UTF-8):
//!
//! - `POST /v1/check` screens one query
//! - `GET|POST /v1/patterns` lists or adds patterns
//! - `GET /v1/alarms?status=...` lists alarms
//! - `POST /v1/alarms/{id}/decision` confirms or dismisses an alarm
//! - `GET /v1/health`

pub mod api;
mod routes;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use sqlia_core::alarm_queue::{AlarmError, AlarmQueue, AlarmRecord, Decision};
use sqlia_core::pattern_store::{AddOutcome, PatternSource, PatternStore, StoreError};
use sqlia_core::{CompiledPatterns, DetectorConfig, Verdict};
use thiserror::Error;

pub use routes::router;

/// What happens to a query that raised an alarm while it awaits review.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AlarmPolicy {
    #[default]
    AllowAndLog,
    Block,
}

impl FromStr for AlarmPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "allow" => Ok(AlarmPolicy::AllowAndLog),
            "block" => Ok(AlarmPolicy::Block),
            other => Err(format!(
                "unknown alarm policy {other:?} (expected allow or block)"
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub pattern_file: PathBuf,
    pub alarm_file: PathBuf,
    pub detector: DetectorConfig,
    pub alarm_policy: AlarmPolicy,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("pattern file {path}: {source}")]
    Patterns { path: PathBuf, source: StoreError },
    #[error("alarm journal {path}: {source}")]
    Alarms { path: PathBuf, source: AlarmError },
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct CompiledSnapshot {
    version: usize,
    patterns: Arc<CompiledPatterns>,
}

/// Shared service state. Every check runs against one compiled snapshot of
/// the pattern list; mutations go through the store and queue writers.
pub struct AppState {
    store: PatternStore,
    alarms: AlarmQueue,
    detector: DetectorConfig,
    policy: AlarmPolicy,
    compiled: RwLock<CompiledSnapshot>,
}

/// Outcome of a check, before the alarm policy is applied.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    pub alarm: Option<AlarmRecord>,
}

impl AppState {
    pub fn open(
        pattern_file: impl Into<PathBuf>,
        alarm_file: impl Into<PathBuf>,
        detector: DetectorConfig,
        policy: AlarmPolicy,
    ) -> Result<Self, ServiceError> {
        let pattern_file = pattern_file.into();
        let alarm_file = alarm_file.into();
        let store = PatternStore::load(&pattern_file).map_err(|source| ServiceError::Patterns {
            path: pattern_file.clone(),
            source,
        })?;
        let alarms = AlarmQueue::load(&alarm_file).map_err(|source| ServiceError::Alarms {
            path: alarm_file.clone(),
            source,
        })?;
        let snapshot = store.snapshot();
        let patterns = CompiledPatterns::compile(&snapshot).expect("stored patterns are non-empty");
        Ok(AppState {
            store,
            alarms,
            detector,
            policy,
            compiled: RwLock::new(CompiledSnapshot {
                version: snapshot.len(),
                patterns: Arc::new(patterns),
            }),
        })
    }

    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        Self::open(
            &config.pattern_file,
            &config.alarm_file,
            config.detector,
            config.alarm_policy,
        )
    }

    pub fn store(&self) -> &PatternStore {
        &self.store
    }

    pub fn alarms(&self) -> &AlarmQueue {
        &self.alarms
    }

    pub fn policy(&self) -> AlarmPolicy {
        self.policy
    }

    pub fn detector(&self) -> &DetectorConfig {
        &self.detector
    }

    /// Compiled automata for the current pattern list. The list only grows,
    /// so its length identifies a version.
    pub fn compiled(&self) -> Arc<CompiledPatterns> {
        let snapshot = self.store.snapshot();
        {
            let cached = self.compiled.read().expect("compiled cache lock");
            if cached.version >= snapshot.len() {
                return cached.patterns.clone();
            }
        }
        let fresh =
            Arc::new(CompiledPatterns::compile(&snapshot).expect("stored patterns are non-empty"));
        let mut cached = self.compiled.write().expect("compiled cache lock");
        if cached.version < snapshot.len() {
            *cached = CompiledSnapshot {
                version: snapshot.len(),
                patterns: fresh.clone(),
            };
            fresh
        } else {
            cached.patterns.clone()
        }
    }

    /// Screens a query and journals an alarm when the verdict calls for one.
    pub fn check(&self, query: &str) -> Result<CheckOutcome, AlarmError> {
        let verdict = self
            .compiled()
            .check(query.as_bytes(), &self.detector)
            .expect("&str input is valid UTF-8");
        let alarm = match verdict {
            Verdict::Alarm { .. } => Some(self.alarms.raise_alarm(query, &verdict)?),
            _ => None,
        };
        Ok(CheckOutcome { verdict, alarm })
    }

    pub fn add_pattern(&self, text: &str) -> Result<AddOutcome, StoreError> {
        self.store.add_pattern(text, PatternSource::AdminConfirmed)
    }

    pub fn decide(&self, alarm_id: u64, decision: Decision) -> Result<AlarmRecord, AlarmError> {
        self.alarms.decide_alarm(alarm_id, decision, &self.store)
    }
}

/// Binds the listener. Separate from [`serve`] so callers can learn the
/// actual address (e.g. when binding port 0).
pub async fn bind(addr: SocketAddr) -> Result<tokio::net::TcpListener, ServiceError> {
    tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })
}

/// Serves until `shutdown` resolves. Journals are written through on every
/// mutation, so nothing is buffered at shutdown.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, patterns = state.store.len(), "detection service listening");
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}
