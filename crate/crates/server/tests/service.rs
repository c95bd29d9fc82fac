mod common;

use common::*;
use twistworld::batch::{run_rollout, square_loop};
use twistworld::se3::Pose;
use twistworld_server::protocol::{ClientMessage, ServerMessage};

#[tokio::test(flavor = "multi_thread")]
async fn served_square_matches_batch_rollout() {
    let cfg = small();
    let addr = start(cfg.clone());
    let actions = square_loop(4, 2, 90.0, 0.05);
    let s = create(addr, serde_json::json!({ "seed": 11 })).await;
    let mut ws = connect(addr, s.id).await;
    send_actions(&mut ws, &actions).await;
    send(&mut ws, &ClientMessage::Flush).await;

    let mut batch_cfg = cfg;
    batch_cfg.seed = 11;
    let run = run_rollout(&batch_cfg, Pose::identity(), &actions).unwrap();
    let served = collect_digests(&mut ws, run.frames.len()).await;
    assert_eq!(served, run.digests());
}

#[tokio::test(flavor = "multi_thread")]
async fn endpoints_respond() {
    let addr = start(small());
    let http = reqwest::Client::new();
    let health: serde_json::Value = http.get(format!("http://{addr}/health")).send().await.unwrap().json().await.unwrap();
    assert_eq!(health["status"], "ok");

    let s = create(addr, serde_json::json!({ "config": "long_term_L=1\n" })).await;
    let text = http
        .get(format!("http://{addr}/sessions/{}/config", s.id))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert!(text.contains("long_term_L=1"));
    assert_eq!(text, s.config);

    let snap = http
        .post(format!("http://{addr}/sessions/{}/snapshot", s.id))
        .send()
        .await
        .unwrap();
    assert_eq!(snap.status(), 200);
    let pool = twistworld::formats::read_pool(&snap.bytes().await.unwrap(), 8).unwrap();
    assert_eq!(pool.len(), 1);

    let missing = http.get(format!("http://{addr}/sessions/999/config")).send().await.unwrap();
    assert_eq!(missing.status(), 404);
    let bad = http
        .post(format!("http://{addr}/sessions"))
        .json(&serde_json::json!({ "config": "S=7\n" }))
        .send()
        .await
        .unwrap();
    assert_eq!(bad.status(), 400);
}

#[tokio::test(flavor = "multi_thread")]
async fn malformed_message_closes_only_that_session() {
    let addr = start(small());
    let s = create(addr, serde_json::json!({})).await;
    let mut ws = connect(addr, s.id).await;
    collect_digests(&mut ws, 2).await;
    ws_send_raw(&mut ws, r#"{"type":"action","keys":["Q"],"dx":0,"dy":0,"dt":0.05}"#).await;
    match next(&mut ws).await {
        Some(ServerMessage::Error { code, .. }) => assert_eq!(code, "invalid_argument"),
        other => panic!("expected an error, got {other:?}"),
    }
    assert!(next(&mut ws).await.is_none());

    let health: serde_json::Value = reqwest::get(format!("http://{addr}/health")).await.unwrap().json().await.unwrap();
    assert_eq!(health["status"], "ok");
    let again = create(addr, serde_json::json!({})).await;
    let mut ws = connect(addr, again.id).await;
    assert_eq!(collect_digests(&mut ws, 2).await.len(), 2);
}

async fn ws_send_raw(ws: &mut Ws, text: &str) {
    use futures::SinkExt;
    ws.send(tokio_tungstenite::tungstenite::Message::Text(text.into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn idle_stream_is_static() {
    let addr = start(small());
    let s = create(addr, serde_json::json!({})).await;
    let mut ws = connect(addr, s.id).await;
    let warm = collect_digests(&mut ws, 2).await;
    assert_eq!(warm[0].1, warm[1].1);
    let quiet = tokio::time::timeout(std::time::Duration::from_secs(2), futures::StreamExt::next(&mut ws)).await;
    assert!(quiet.is_err(), "no frames arrive without actions");
}

#[tokio::test(flavor = "multi_thread")]
async fn slow_consumer_loses_no_actions() {
    let mut cfg = small();
    cfg.high_water = 4;
    let addr = start(cfg.clone());
    let s = create(addr, serde_json::json!({})).await;
    let mut ws = connect(addr, s.id).await;
    let actions = square_loop(10, 3, 60.0, 0.05);
    send_actions(&mut ws, &actions).await;
    send(&mut ws, &ClientMessage::Flush).await;
    tokio::time::sleep(std::time::Duration::from_millis(500)).await;
    let run = run_rollout(&cfg, Pose::identity(), &actions).unwrap();
    let served = collect_digests(&mut ws, run.frames.len()).await;
    assert_eq!(served, run.digests());
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_sessions_are_independent() {
    let addr = start(small());
    let actions = square_loop(3, 2, 80.0, 0.05);
    let mut results = Vec::new();
    for seed in [1u64, 2] {
        let s = create(addr, serde_json::json!({ "seed": seed, "scene_seed": seed })).await;
        results.push((seed, connect(addr, s.id).await));
    }
    for (_, ws) in results.iter_mut() {
        send_actions(ws, &actions).await;
        send(ws, &ClientMessage::Flush).await;
    }
    for (seed, ws) in results.iter_mut() {
        let mut cfg = small();
        cfg.seed = *seed;
        cfg.scene_seed = *seed;
        let run = run_rollout(&cfg, Pose::identity(), &actions).unwrap();
        assert_eq!(collect_digests(ws, run.frames.len()).await, run.digests());
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn reset_restarts_the_stream() {
    let addr = start(small());
    let s = create(addr, serde_json::json!({})).await;
    let mut ws = connect(addr, s.id).await;
    let warm = collect_digests(&mut ws, 2).await;
    send_actions(&mut ws, &square_loop(2, 1, 40.0, 0.05)).await;
    send(&mut ws, &ClientMessage::Flush).await;
    collect_digests(&mut ws, 24).await;
    send(&mut ws, &ClientMessage::Reset).await;
    assert_eq!(collect_digests(&mut ws, 2).await, warm);
}

#[tokio::test(flavor = "multi_thread")]
async fn second_stream_is_refused() {
    let addr = start(small());
    let s = create(addr, serde_json::json!({})).await;
    let _ws = connect(addr, s.id).await;
    let second = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{}/stream", s.id)).await;
    assert!(second.is_err());
}
