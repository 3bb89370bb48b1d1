use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use sola_core::agent::Agent;
use sola_core::config::DomainConfig;
use sola_core::world::WorldState;
use sola_server::journal::{from_jsonl, to_jsonl};
use sola_server::{replay, router, AppState};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn lights() -> (Agent, WorldState) {
    let cfg = DomainConfig::load(&data("smart_home.json")).unwrap();
    let agent = Agent::from_config_with(&cfg, |t| t.as_str() == "lights").unwrap();
    (agent, WorldState::from_config(&cfg.world))
}

fn app() -> (AppState, Router) {
    let (agent, world) = lights();
    let state = AppState::new(agent, world);
    (state.clone(), router(state))
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn open(app: &Router, user: &str) -> u64 {
    let (status, v) = post(app, "/sessions", json!({ "userId": user })).await;
    assert_eq!(status, StatusCode::OK);
    v["sessionId"].as_u64().unwrap()
}

#[tokio::test]
async fn walkthrough_over_http() {
    let (_, app) = app();
    let sid = open(&app, "alice").await;
    let (status, v) = post(&app, &format!("/sessions/{sid}/utterance"), json!({"text": "turn off the light in the kitchen"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["replyType"], "Options");
    assert_eq!(
        v["options"],
        json!(["switch off the light in the kitchen", "switch on the light in the kitchen", "change the color of the light"])
    );
    let (_, v) = post(&app, &format!("/sessions/{sid}/choice"), json!({"index": 1})).await;
    assert_eq!(v, json!({"replyType": "ExecuteResult", "text": "switched off the light in the kitchen"}));

    let (_, v) = get(&app, "/store/seed-commands").await;
    let texts: Vec<&str> = v["seedCommands"].as_array().unwrap().iter().map(|s| s["text"].as_str().unwrap()).collect();
    assert!(texts.contains(&"turn off the light in the $X"));

    let (_, v) = post(&app, &format!("/sessions/{sid}/utterance"), json!({"text": "turn off the light in the bedroom"})).await;
    assert_eq!(v["replyType"], "ExecuteResult");

    let (_, v) = get(&app, "/metrics").await;
    assert_eq!(v["series"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn fresh_metrics_are_empty() {
    let (_, app) = app();
    let (status, v) = get(&app, "/metrics").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!({"series": []}));
    let (_, v) = get(&app, "/kb/facts").await;
    assert_eq!(v["facts"], json!([]));
}

#[tokio::test]
async fn choice_while_idle_conflicts_without_side_effects() {
    let (state, app) = app();
    let sid = open(&app, "alice").await;
    let before = state.read(|i| (i.agent.state().clone(), i.agent.session(sola_core::model::SessionId(sid)).cloned(), i.journal.len()));
    let (status, v) = post(&app, &format!("/sessions/{sid}/choice"), json!({"index": 1})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(v["error"].as_str().unwrap().contains("Idle"));
    let after = state.read(|i| (i.agent.state().clone(), i.agent.session(sola_core::model::SessionId(sid)).cloned(), i.journal.len()));
    assert_eq!(before, after);
}

#[tokio::test]
async fn error_statuses() {
    let (_, app) = app();
    let (status, _) = post(&app, "/sessions/99/utterance", json!({"text": "hi"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get(&app, "/sessions/99").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let sid = open(&app, "alice").await;
    let (status, _) = post(&app, &format!("/sessions/{sid}/utterance"), json!({"words": "hi"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let req = Request::post(format!("/sessions/{sid}/utterance"))
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(send(&app, req).await.0, StatusCode::BAD_REQUEST);
    let (status, _) = post(&app, "/sessions", json!({})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    post(&app, &format!("/sessions/{sid}/utterance"), json!({"text": "turn off the light in the kitchen"})).await;
    let (status, _) = post(&app, &format!("/sessions/{sid}/choice"), json!({"index": 7})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(&app, &format!("/sessions/{sid}/side"), json!({"vote": "yes", "skip": true})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, v) = get(&app, &format!("/sessions/{sid}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["phase"]["phase"], "awaitOptionChoice");
}

#[tokio::test]
async fn none_choice_asks_for_rephrase_and_utterance_routes_to_it() {
    let (state, app) = app();
    let sid = open(&app, "alice").await;
    post(&app, &format!("/sessions/{sid}/utterance"), json!({"text": "turn off the light in the kitchen"})).await;
    let (_, v) = post(&app, &format!("/sessions/{sid}/choice"), json!({"none": true})).await;
    assert_eq!(v["replyType"], "AskRephrase");
    let (_, v) = post(&app, &format!("/sessions/{sid}/utterance"), json!({"text": "switch off the light in the kitchen"})).await;
    assert_eq!(v["replyType"], "ExecuteResult");
    let kinds: Vec<String> = state.read(|i| {
        i.journal.iter().map(|c| serde_json::to_value(c).unwrap()["call"].as_str().unwrap().to_string()).collect()
    });
    assert_eq!(kinds, ["openSession", "utterance", "choice", "rephrase"]);
}

#[tokio::test]
async fn snapshot_endpoint_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.jsonl");
    let (agent, world) = lights();
    let state = AppState::new(agent, world).with_snapshot_path(path.clone());
    let app = router(state);
    let (status, v) = post(&app, "/snapshot", json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["counts"]["seedCommands"], 3);
    let (loaded, _) = sola_core::snapshot::load_snapshot(&path).unwrap();
    assert_eq!(loaded.store.len(), 3);

    let (_, app) = self::app();
    let (status, _) = post(&app, "/snapshot", json!({})).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

/// The recorded transcript driven over HTTP ends in the same state as the
/// same calls made directly on the engine.
#[tokio::test]
async fn recorded_transcript_replays_identically() {
    let text = std::fs::read_to_string(data("transcripts/teaching.jsonl")).unwrap();
    let calls = from_jsonl(&text).unwrap();
    assert!(calls.len() >= 30);

    let (state, app) = app();
    for call in &calls {
        let (uri, body) = call.http_request();
        let (status, v) = post(&app, &uri, body).await;
        assert_eq!(status, StatusCode::OK, "{uri}: {v}");
    }
    let res = app.clone().oneshot(Request::get("/journal").body(Body::empty()).unwrap()).await.unwrap();
    let served = res.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(served, text.as_bytes());
    assert_eq!(state.read(|i| to_jsonl(&i.journal)), text);

    let (mut agent, mut world) = lights();
    replay(&mut agent, &mut world, &calls).unwrap();
    state.read(|i| {
        assert_eq!(i.agent.state(), agent.state());
        assert!(i.agent.sessions().eq(agent.sessions()));
        assert_eq!(i.world, world);
    });
}
