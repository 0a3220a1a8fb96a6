//! Frontend channel: JSON text frames over a WebSocket at `/ws`.

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use strider_core::protocol::{decode_ui_event, encode_bridge_record, BridgeRecord};
use tokio::sync::{broadcast, mpsc};

use crate::bridge::{BridgeHandle, Inbound};

pub fn router(handle: BridgeHandle) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/ws", get(upgrade))
        .route("/api/registry", get(registry))
        .with_state(handle)
}

async fn index() -> &'static str {
    "strider bridge\nfrontend channel: /ws\nmode registry: /api/registry\n"
}

async fn registry(State(h): State<BridgeHandle>) -> impl IntoResponse {
    Json(h.registry.summaries())
}

async fn upgrade(ws: WebSocketUpgrade, State(h): State<BridgeHandle>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, h))
}

async fn client(socket: WebSocket, h: BridgeHandle) {
    let (mut sink, mut stream) = socket.split();
    let mut records = h.records.subscribe();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<BridgeRecord>();
    let hello = BridgeRecord::Registry { modes: h.registry.summaries() };
    if sink.send(Message::Text(encode_bridge_record(&hello).into())).await.is_err() {
        return;
    }

    let writer = tokio::spawn(async move {
        loop {
            let rec = tokio::select! {
                r = records.recv() => match r {
                    Ok(r) => r,
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return,
                },
                r = reply_rx.recv() => match r {
                    Some(r) => r,
                    None => return,
                },
            };
            if sink.send(Message::Text(encode_bridge_record(&rec).into())).await.is_err() {
                return;
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        match decode_ui_event(text.as_str()) {
            Ok(event) => {
                if h.inbound.send(Inbound { event, reply: reply_tx.clone() }).await.is_err() {
                    break;
                }
            }
            Err(e) => {
                let _ = reply_tx.send(BridgeRecord::Error { message: e.to_string() });
            }
        }
    }
    writer.abort();
}
