//! Bridge side of the backend channels.

use std::net::SocketAddr;
use std::time::Duration;

use strider_core::protocol::{decode_telemetry, encode_command, FrameSplitter, MetaCommand, TelemetrySample};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use crate::ServiceError;

/// Connected command publisher plus a telemetry subscription.
#[derive(Debug)]
pub struct BackendLink {
    commands: TcpStream,
    reader: JoinHandle<()>,
}

impl BackendLink {
    /// Connects to both channels, retrying for up to `patience`.
    pub async fn connect(
        command_addr: SocketAddr,
        telemetry_addr: SocketAddr,
        patience: Duration,
    ) -> Result<(Self, mpsc::UnboundedReceiver<TelemetrySample>), ServiceError> {
        let commands = connect_retry(command_addr, patience).await?;
        let telemetry = connect_retry(telemetry_addr, patience).await?;
        let _ = commands.set_nodelay(true);
        let (tx, rx) = mpsc::unbounded_channel();
        let reader = tokio::spawn(read_telemetry(telemetry, tx));
        Ok((Self { commands, reader }, rx))
    }

    pub async fn send(&mut self, cmd: &MetaCommand) -> Result<(), ServiceError> {
        let frame = encode_command(cmd).map_err(|e| ServiceError::Protocol(e.to_string()))?;
        self.commands
            .write_all(&frame)
            .await
            .map_err(|e| ServiceError::BackendUnavailable(e.to_string()))
    }
}

impl Drop for BackendLink {
    fn drop(&mut self) {
        self.reader.abort();
    }
}

async fn connect_retry(addr: SocketAddr, patience: Duration) -> Result<TcpStream, ServiceError> {
    let deadline = tokio::time::Instant::now() + patience;
    loop {
        match TcpStream::connect(addr).await {
            Ok(s) => return Ok(s),
            Err(e) if tokio::time::Instant::now() >= deadline => {
                return Err(ServiceError::BackendUnavailable(format!("{addr}: {e}")))
            }
            Err(_) => tokio::time::sleep(Duration::from_millis(100)).await,
        }
    }
}

async fn read_telemetry(mut stream: TcpStream, tx: mpsc::UnboundedSender<TelemetrySample>) {
    let mut splitter = FrameSplitter::new();
    let mut buf = vec![0u8; 8192];
    loop {
        let n = match stream.read(&mut buf).await {
            Ok(0) | Err(_) => {
                tracing::warn!("telemetry channel closed");
                return;
            }
            Ok(n) => n,
        };
        for frame in splitter.push(&buf[..n]) {
            match decode_telemetry(&frame) {
                Ok(s) => {
                    if tx.send(s).is_err() {
                        return;
                    }
                }
                Err(e) => tracing::warn!(error = %e, "rejected telemetry frame"),
            }
        }
    }
}
