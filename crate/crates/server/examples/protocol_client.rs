//! Starts the service in-process, opens a session and walks a scripted
//! square over the WebSocket stream.
//!
//! Pass an address (`host:port`) to talk to a running `twistworld serve`
//! instead.

use std::path::PathBuf;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use tokio_tungstenite::connect_async;
use tokio_tungstenite::tungstenite::Message;
use twistworld::batch::square_loop;
use twistworld::config::SessionConfig;
use twistworld_server::protocol::{ClientMessage, ServerMessage};
use twistworld_server::service::{spawn, SessionCreated};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let addr = match std::env::args().nth(1) {
        Some(a) => a.parse()?,
        None => spawn("127.0.0.1:0".parse()?, SessionConfig::default(), PathBuf::from("ui"))?,
    };
    let created: SessionCreated = reqwest::Client::new()
        .post(format!("http://{addr}/sessions"))
        .json(&serde_json::json!({ "seed": 5 }))
        .send()
        .await?
        .json()
        .await?;
    println!("session {} on {addr}", created.id);

    let (mut ws, _) = connect_async(format!("ws://{addr}/sessions/{}/stream", created.id)).await?;
    let actions = square_loop(4, 2, 126.0, 0.05);
    for a in &actions {
        ws.send(Message::Text(ClientMessage::action(a).to_json().into())).await?;
    }
    ws.send(Message::Text(ClientMessage::Flush.to_json().into())).await?;

    let mut seen = 0;
    while let Ok(Some(msg)) = tokio::time::timeout(Duration::from_secs(2), ws.next()).await {
        let Message::Text(text) = msg? else { continue };
        match serde_json::from_str::<ServerMessage>(&text)? {
            ServerMessage::Frame { index, pose, retrieved, step_ms, .. } => {
                seen += 1;
                if index % 6 == 0 {
                    println!("frame {index:3} t=({:.2}, {:.2}, {:.2}) memory {retrieved:?} {step_ms:.2} ms", pose[0], pose[1], pose[2]);
                }
            }
            ServerMessage::Error { code, detail } => {
                eprintln!("error {code}: {detail}");
                break;
            }
        }
    }
    println!("{seen} frames received");
    ws.close(None).await?;
    Ok(())
}
