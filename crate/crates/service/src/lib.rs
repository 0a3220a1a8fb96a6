//! Networked runtime: the reference backend behind TCP command and
//! telemetry channels, the real-time bridge, and the WebSocket frontend
//! channel.

pub mod backend;
pub mod bridge;
pub mod link;
pub mod web;

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use strider_core::planner::{Planner, PlannerConfig};
use strider_core::registry::Registry;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};
use tokio::task::JoinHandle;

pub use backend::BackendServer;
pub use bridge::{BridgeConfig, BridgeHandle};
pub use link::BackendLink;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("address {0} is already in use")]
    PortInUse(SocketAddr),
    #[error("io: {0}")]
    Io(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Bridge(#[from] strider_core::bridge::BridgeError),
}

pub(crate) async fn bind(addr: SocketAddr) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        io::ErrorKind::AddrInUse => ServiceError::PortInUse(addr),
        _ => ServiceError::Io(format!("{addr}: {e}")),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendChoice {
    /// Start the reference backend in-process on these addresses.
    Builtin { command_addr: SocketAddr, telemetry_addr: SocketAddr },
    /// Attach to an already running backend.
    External { command_addr: SocketAddr, telemetry_addr: SocketAddr },
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub http_addr: SocketAddr,
    pub backend: BackendChoice,
    pub record_keyboard: bool,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub initial_mode: usize,
    pub planner: PlannerConfig,
}

/// A running service; dropping it stops every task.
#[derive(Debug)]
pub struct Service {
    pub http_addr: SocketAddr,
    pub command_addr: SocketAddr,
    pub telemetry_addr: SocketAddr,
    pub handle: BridgeHandle,
    backend: Option<BackendServer>,
    tasks: Vec<JoinHandle<()>>,
}

impl Service {
    pub async fn start(registry: Arc<Registry>, config: ServeConfig) -> Result<Self, ServiceError> {
        let http = bind(config.http_addr).await?;
        let http_addr = http.local_addr().map_err(|e| ServiceError::Io(e.to_string()))?;

        let (backend, command_addr, telemetry_addr, backend_name) = match config.backend {
            BackendChoice::Builtin { command_addr, telemetry_addr } => {
                let server = BackendServer::start(registry.clone(), config.planner, command_addr, telemetry_addr).await?;
                let (c, t) = (server.command_addr, server.telemetry_addr);
                (Some(server), c, t, "reference-kinematic".to_string())
            }
            BackendChoice::External { command_addr, telemetry_addr } => {
                (None, command_addr, telemetry_addr, format!("external@{command_addr}"))
            }
        };
        let (link, telemetry) = BackendLink::connect(command_addr, telemetry_addr, Duration::from_secs(5)).await?;

        let bridge_config = BridgeConfig {
            initial_mode: config.initial_mode,
            record_keyboard: config.record_keyboard,
            out_dir: config.out_dir,
            seed: config.seed,
            backend_name,
        };
        let planner = Planner::new(registry.clone(), config.planner);
        let session = bridge::new_session(planner, &bridge_config)?;
        let (inbound_tx, inbound_rx) = mpsc::channel(256);
        let (records, _) = broadcast::channel(256);
        let handle = BridgeHandle { inbound: inbound_tx, records: records.clone(), registry: registry.clone() };
        let task = bridge::BridgeTask {
            session,
            link,
            telemetry,
            inbound: inbound_rx,
            records,
            registry,
            config: bridge_config,
            running_recipe: None,
        };
        let bridge_task = tokio::spawn(task.run());
        let app = web::router(handle.clone());
        let http_task = tokio::spawn(async move {
            if let Err(e) = axum::serve(http, app).await {
                tracing::error!(error = %e, "http server stopped");
            }
        });
        tracing::info!(%http_addr, "frontend channel at ws://{http_addr}/ws");
        Ok(Self { http_addr, command_addr, telemetry_addr, handle, backend, tasks: vec![bridge_task, http_task] })
    }

    pub fn frontend_url(&self) -> String {
        format!("ws://{}/ws", self.http_addr)
    }

    /// Resolves when the HTTP server stops.
    pub async fn wait(mut self) {
        if let Some(http) = self.tasks.pop() {
            let _ = http.await;
        }
    }

    pub fn shutdown(&self) {
        for t in &self.tasks {
            t.abort();
        }
        if let Some(b) = &self.backend {
            b.shutdown();
        }
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.shutdown();
    }
}
