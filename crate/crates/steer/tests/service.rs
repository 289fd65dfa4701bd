use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mll_core::family::{registry_entry, validate};
use mll_steer::{router, AppState, Event, EventKind};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(AppState::new(None))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes)
        .unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, v)
}

async fn create(app: &Router, body: Value) -> String {
    let (status, v) = call(app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_owned()
}

/// Read events until `stop` holds or the stream ends.
async fn events_until(app: &Router, id: &str, stop: impl Fn(&Event) -> bool) -> Vec<Event> {
    let req = Request::get(format!("/sessions/{id}/events"))
        .body(Body::empty())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["content-type"], "application/x-ndjson");
    let mut body = resp.into_body();
    let mut buf = String::new();
    let mut out = Vec::new();
    let read = async {
        while let Some(frame) = body.frame().await {
            let Ok(data) = frame.unwrap().into_data() else {
                continue;
            };
            buf.push_str(std::str::from_utf8(&data).unwrap());
            while let Some(n) = buf.find('\n') {
                let line: String = buf.drain(..=n).collect();
                let e: Event = serde_json::from_str(&line).unwrap();
                let done = stop(&e);
                out.push(e);
                if done {
                    return;
                }
            }
        }
    };
    tokio::time::timeout(Duration::from_secs(60), read)
        .await
        .expect("event stream stalled");
    out
}

#[tokio::test]
async fn families_lists_the_registry() {
    let (status, v) = call(&app(), Method::GET, "/families", None).await;
    assert_eq!(status, StatusCode::OK);
    let all = v.as_array().unwrap();
    assert_eq!(all.len(), 15);
    let geo3 = all.iter().find(|f| f["name"] == "geo3").unwrap();
    assert_eq!(geo3["k"], 24);
}

#[tokio::test]
async fn unknown_family_and_session_are_not_found() {
    let app = app();
    let (status, _) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"family": "nope"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::GET, "/sessions/abc", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(
        &app,
        Method::PATCH,
        "/sessions/abc",
        Some(json!({"paused": true})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn finished_session_streams_ordered_events() {
    let app = app();
    let id = create(
        &app,
        json!({"family": "demo", "seed": 3, "budgetEvals": 200_000, "refreshEvals": 20_000}),
    )
    .await;
    let events = events_until(&app, &id, |e| matches!(e.kind, EventKind::Finished { .. })).await;
    assert!(events.windows(2).all(|w| w[0].seq < w[1].seq));
    let bests: Vec<f64> = events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::Best { value, .. } => Some(value),
            _ => None,
        })
        .collect();
    assert!(bests.windows(2).all(|w| w[1] <= w[0]));
    let f = registry_entry("demo").unwrap();
    let snap = events.iter().rev().find_map(|e| match &e.kind {
        EventKind::Snapshot {
            ladder,
            value,
            realization,
            ..
        } => Some((ladder.clone(), *value, realization.len())),
        _ => None,
    });
    let (ladder, value, quads) = snap.expect("at least one snapshot");
    assert!(validate(&f, &ladder).is_empty());
    assert_eq!(quads, ladder.quad_count());
    let EventKind::Finished {
        evaluation,
        best_value,
    } = &events.last().unwrap().kind
    else {
        unreachable!()
    };
    assert_eq!(*evaluation, 200_000);
    assert_eq!(*best_value, Some(value));

    let (_, status) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status["finished"], true);
    assert_eq!(status["bestValue"].as_f64(), Some(value));
    // a late subscriber still sees the end of the feed
    let again = events_until(&app, &id, |_| false).await;
    assert!(matches!(
        again.last().unwrap().kind,
        EventKind::Finished { .. }
    ));
}

#[tokio::test(flavor = "multi_thread")]
async fn patches_are_validated_and_acknowledged() {
    let app = app();
    let id = create(&app, json!({"family": "geo2", "seed": 1})).await;
    let uri = format!("/sessions/{id}");
    let (status, _) = call(&app, Method::PATCH, &uri, Some(json!({"stepMax": 0.0}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, Method::PATCH, &uri, Some(json!({"maskA": 2.0}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, Method::PATCH, &uri, Some(json!({"bogus": 1}))).await;
    assert!(status.is_client_error());

    let (status, ack) = call(
        &app,
        Method::PATCH,
        &uri,
        Some(json!({"coercion": 32.0, "stepMax": 0.02})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["version"], 2);
    assert_eq!(ack["config"]["coercion"], 32.0);
    let events = events_until(&app, &id, |e| {
        matches!(e.kind, EventKind::Config { version: 2, .. })
    })
    .await;
    let EventKind::Config { config, .. } = &events.last().unwrap().kind else {
        unreachable!()
    };
    assert_eq!(config.step_max, 0.02);

    let (_, ack) = call(&app, Method::PATCH, &uri, Some(json!({"signs": [1, -1]}))).await;
    assert_eq!(ack["config"]["signs"], json!([1, -1]));
    let (_, ack) = call(&app, Method::PATCH, &uri, Some(json!({"signs": null}))).await;
    assert!(ack["config"].get("signs").is_none());
    assert_eq!(ack["version"], 4);
    call(&app, Method::DELETE, &uri, None).await;
}

#[tokio::test(flavor = "multi_thread")]
async fn pause_stops_evaluations() {
    let app = app();
    let id = create(&app, json!({"family": "cross2", "seed": 2})).await;
    let uri = format!("/sessions/{id}");
    call(&app, Method::PATCH, &uri, Some(json!({"paused": true}))).await;
    events_until(&app, &id, |e| {
        matches!(e.kind, EventKind::Config { version: 2, .. })
    })
    .await;
    tokio::time::sleep(Duration::from_millis(50)).await;
    let (_, a) = call(&app, Method::GET, &uri, None).await;
    tokio::time::sleep(Duration::from_millis(200)).await;
    let (_, b) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(a["evaluations"], b["evaluations"]);
    call(&app, Method::PATCH, &uri, Some(json!({"paused": false}))).await;
    tokio::time::sleep(Duration::from_millis(200)).await;
    let (_, c) = call(&app, Method::GET, &uri, None).await;
    assert!(c["evaluations"].as_u64() > b["evaluations"].as_u64());
    call(&app, Method::DELETE, &uri, None).await;
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_are_isolated_and_exportable() {
    let app = app();
    let a = create(
        &app,
        json!({"family": "demo", "seed": 1, "budgetEvals": 50_000}),
    )
    .await;
    let b = create(
        &app,
        json!({"family": "geo2", "seed": 1, "budgetEvals": 50_000}),
    )
    .await;
    for id in [&a, &b] {
        events_until(&app, id, |e| matches!(e.kind, EventKind::Finished { .. })).await;
    }
    let (_, ra) = call(&app, Method::GET, &format!("/sessions/{a}/export"), None).await;
    let (_, rb) = call(&app, Method::GET, &format!("/sessions/{b}/export"), None).await;
    assert_eq!(ra["familySpec"]["name"], "demo");
    assert_eq!(rb["familySpec"]["name"], "geo2");
    assert_eq!(ra["evaluations"], 50_000);
    let (status, csv) = call(
        &app,
        Method::GET,
        &format!("/sessions/{a}/export?format=realization-csv"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let csv = csv.as_str().unwrap();
    assert_eq!(
        csv.lines().filter(|l| !l.starts_with('#')).count(),
        1 + 4 * 2
    );
    let (status, _) = call(
        &app,
        Method::GET,
        &format!("/sessions/{a}/export?format=png"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, list) = call(&app, Method::GET, "/sessions", None).await;
    assert_eq!(list.as_array().unwrap().len(), 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn deleted_sessions_persist_their_record() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::new(Some(dir.path().to_owned())));
    let id = create(&app, json!({"family": "demo", "seed": 4})).await;
    tokio::time::sleep(Duration::from_millis(100)).await;
    let (status, v) = call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["finished"], true);
    let text = std::fs::read_to_string(dir.path().join(format!("session-{id}.json"))).unwrap();
    let rec: mll_steer::SessionRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(rec.id, id);
    assert!(rec.evaluations > 0);
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "tmp"))
        .collect();
    assert!(leftovers.is_empty());
}
