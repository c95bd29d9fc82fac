#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};
use twistworld::action::InputState;
use twistworld::config::SessionConfig;
use twistworld::world::Image;
use twistworld_server::protocol::{ClientMessage, ServerMessage};
use twistworld_server::service::{spawn, SessionCreated};

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub fn start(cfg: SessionConfig) -> SocketAddr {
    spawn("127.0.0.1:0".parse().unwrap(), cfg, PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("ui")).unwrap()
}

pub async fn create(addr: SocketAddr, body: serde_json::Value) -> SessionCreated {
    let resp = reqwest::Client::new()
        .post(format!("http://{addr}/sessions"))
        .json(&body)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 201);
    resp.json().await.unwrap()
}

pub async fn connect(addr: SocketAddr, id: u64) -> Ws {
    connect_async(format!("ws://{addr}/sessions/{id}/stream")).await.unwrap().0
}

pub async fn send(ws: &mut Ws, m: &ClientMessage) {
    ws.send(Message::Text(m.to_json().into())).await.unwrap();
}

pub async fn send_actions(ws: &mut Ws, actions: &[InputState]) {
    for a in actions {
        send(ws, &ClientMessage::action(a)).await;
    }
}

/// Next server message, or `None` once the stream closes or stays silent.
pub async fn next(ws: &mut Ws) -> Option<ServerMessage> {
    loop {
        match tokio::time::timeout(Duration::from_secs(20), ws.next()).await {
            Ok(Some(Ok(Message::Text(t)))) => return Some(serde_json::from_str(&t).unwrap()),
            Ok(Some(Ok(Message::Close(_)))) | Ok(None) | Err(_) => return None,
            Ok(Some(Ok(_))) => continue,
            Ok(Some(Err(_))) => return None,
        }
    }
}

/// Frame digests until `count` frames have arrived.
pub async fn collect_digests(ws: &mut Ws, count: usize) -> Vec<(u64, String)> {
    let mut out = Vec::new();
    while out.len() < count {
        match next(ws).await {
            Some(m @ ServerMessage::Frame { index, .. }) => {
                let img = Image::from_png(&m.png_bytes().unwrap()).unwrap();
                out.push((index, img.digest()));
            }
            other => panic!("expected a frame, got {other:?}"),
        }
    }
    out
}

pub fn small() -> SessionConfig {
    SessionConfig {
        steps: 16,
        stages: 4,
        r: 2,
        width: 32,
        height: 32,
        ..SessionConfig::default()
    }
}
