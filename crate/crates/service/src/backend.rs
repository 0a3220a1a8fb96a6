//! Built-in reference backend exposed over the command and telemetry
//! channels.
//!
//! The command channel accepts any number of publishers; the latest
//! command wins. Every telemetry subscriber receives every sample.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use strider_core::bridge::{Backend, ReferenceBackend, TELEMETRY_PERIOD_MS};
use strider_core::planner::{Planner, PlannerConfig};
use strider_core::protocol::{decode_command, encode_telemetry, FrameSplitter, MetaCommand};
use strider_core::registry::Registry;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;

use crate::{bind, ServiceError};

#[derive(Debug)]
pub struct BackendServer {
    pub command_addr: SocketAddr,
    pub telemetry_addr: SocketAddr,
    tasks: Vec<JoinHandle<()>>,
}

impl BackendServer {
    /// Binds both channels and starts the 50 Hz loop.
    pub async fn start(
        registry: Arc<Registry>,
        config: PlannerConfig,
        command_addr: SocketAddr,
        telemetry_addr: SocketAddr,
    ) -> Result<Self, ServiceError> {
        let cmd_listener = bind(command_addr).await?;
        let tel_listener = bind(telemetry_addr).await?;
        let command_addr = cmd_listener.local_addr().map_err(|e| ServiceError::Io(e.to_string()))?;
        let telemetry_addr = tel_listener.local_addr().map_err(|e| ServiceError::Io(e.to_string()))?;

        let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
        let (tel_tx, _) = broadcast::channel::<Arc<Vec<u8>>>(1024);
        let backend = ReferenceBackend::new(Planner::new(registry, config));
        let tasks = vec![
            tokio::spawn(accept_commands(cmd_listener, cmd_tx)),
            tokio::spawn(accept_subscribers(tel_listener, tel_tx.clone())),
            tokio::spawn(run_loop(backend, cmd_rx, tel_tx)),
        ];
        tracing::info!(%command_addr, %telemetry_addr, "reference backend listening");
        Ok(Self { command_addr, telemetry_addr, tasks })
    }

    pub fn shutdown(&self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}

impl Drop for BackendServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

async fn accept_commands(listener: TcpListener, tx: mpsc::UnboundedSender<MetaCommand>) {
    while let Ok((stream, peer)) = listener.accept().await {
        tracing::debug!(%peer, "command publisher connected");
        tokio::spawn(read_commands(stream, tx.clone()));
    }
}

async fn read_commands(mut stream: TcpStream, tx: mpsc::UnboundedSender<MetaCommand>) {
    let mut splitter = FrameSplitter::new();
    let mut buf = vec![0u8; 4096];
    loop {
        let n = match stream.read(&mut buf).await {
            Ok(0) | Err(_) => return,
            Ok(n) => n,
        };
        for frame in splitter.push(&buf[..n]) {
            match decode_command(&frame) {
                Ok(cmd) => {
                    if tx.send(cmd).is_err() {
                        return;
                    }
                }
                Err(e) => tracing::warn!(error = %e, "rejected command frame"),
            }
        }
    }
}

async fn accept_subscribers(listener: TcpListener, tx: broadcast::Sender<Arc<Vec<u8>>>) {
    while let Ok((stream, peer)) = listener.accept().await {
        tracing::debug!(%peer, "telemetry subscriber connected");
        let _ = stream.set_nodelay(true);
        tokio::spawn(write_telemetry(stream, tx.subscribe()));
    }
}

async fn write_telemetry(mut stream: TcpStream, mut rx: broadcast::Receiver<Arc<Vec<u8>>>) {
    loop {
        match rx.recv().await {
            Ok(frame) => {
                if stream.write_all(&frame).await.is_err() {
                    return;
                }
            }
            Err(broadcast::error::RecvError::Lagged(n)) => tracing::warn!(skipped = n, "telemetry subscriber lagging"),
            Err(broadcast::error::RecvError::Closed) => return,
        }
    }
}

/// Steps the planner every 20 ms. The sample clock starts at the timestamp
/// of the first command received and advances 20 ms per tick.
async fn run_loop(
    mut backend: ReferenceBackend,
    mut commands: mpsc::UnboundedReceiver<MetaCommand>,
    telemetry: broadcast::Sender<Arc<Vec<u8>>>,
) {
    let mut tick = tokio::time::interval(Duration::from_millis(TELEMETRY_PERIOD_MS));
    tick.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let mut clock: Option<u64> = None;
    loop {
        tokio::select! {
            cmd = commands.recv() => {
                let Some(cmd) = cmd else { return };
                if clock.is_none() {
                    clock = Some(cmd.timestamp_ms.next_multiple_of(TELEMETRY_PERIOD_MS));
                }
                if let Err(e) = backend.send_command(&cmd) {
                    tracing::warn!(error = %e, "command rejected");
                }
            }
            _ = tick.tick() => {
                let Some(t) = clock else { continue };
                match backend.poll_telemetry(t) {
                    Ok(pairs) => {
                        for pair in pairs {
                            match encode_telemetry(&pair.reference) {
                                Ok(frame) => { let _ = telemetry.send(Arc::new(frame)); }
                                Err(e) => tracing::error!(error = %e, "unencodable sample"),
                            }
                        }
                    }
                    Err(e) => tracing::error!(error = %e, "backend step failed"),
                }
                clock = Some(t + TELEMETRY_PERIOD_MS);
            }
        }
    }
}
