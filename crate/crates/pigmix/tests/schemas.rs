//! Live responses against the published JSON Schemas in docs/api.

mod common;

use std::path::Path;

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use common::*;
use pigmix::service::{router, Artifacts, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs/api")
        .join(format!("{name}.schema.json"));
    let s: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    jsonschema::validator_for(&s).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn assert_valid(name: &str, v: &Value) {
    let errors: Vec<String> = schema(name)
        .iter_errors(v)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}\n{v:#}");
}

async fn send(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn responses_match_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    let cfg = ServiceConfig {
        pigments: Some(f.corpus.clone()),
        model: Some(f.model.clone()),
        lut: Some(f.lut.clone()),
        ..ServiceConfig::default()
    };
    let app = router(Artifacts::load(&cfg), &cfg).unwrap();

    let (s, v) = send(&app, "GET", "/api/health", "").await;
    assert_eq!(s, StatusCode::OK);
    assert_valid("health_response", &v);
    let (_, v) = send(&app, "GET", "/api/pigments", "").await;
    assert_valid("pigments_response", &v);
    for body in [
        r#"{"rgb":[64,108,57]}"#,
        r#"{"rgb":[255,255,255],"top_k":100}"#,
        r#"{"rgb":[0,0,0],"top_k":null}"#,
    ] {
        assert_valid("match_request", &serde_json::from_str(body).unwrap());
        let (s, v) = send(&app, "POST", "/api/match", body).await;
        assert_eq!(s, StatusCode::OK, "{body}");
        assert_valid("match_response", &v);
    }
    for body in [
        r#"{"pa":1,"qa":0.01,"pb":13,"qb":0.16}"#,
        r#"{"pa":4,"qa":0.058,"pb":4,"qb":0.058}"#,
    ] {
        assert_valid("mix_request", &serde_json::from_str(body).unwrap());
        let (s, v) = send(&app, "POST", "/api/mix", body).await;
        assert_eq!(s, StatusCode::OK, "{body}");
        assert_valid("mix_response", &v);
    }
    let (s, v) = send(&app, "POST", "/api/mix", r#"{"pa":1,"qa":0.2,"pb":2,"qb":0.04}"#).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_valid("error_response", &v);

    let empty = ServiceConfig::default();
    let app = router(Artifacts::load(&empty), &empty).unwrap();
    let (_, v) = send(&app, "GET", "/api/health", "").await;
    assert_valid("health_response", &v);
    let (s, v) = send(&app, "POST", "/api/match", r#"{"rgb":[1,2,3]}"#).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_valid("error_response", &v);
}

#[test]
fn schemas_reject_what_the_service_rejects() {
    for (name, bad) in [
        ("match_request", json!({"rgb": [1, 2]})),
        ("match_request", json!({"rgb": [1, 2, 256]})),
        ("match_request", json!({"rgb": [1, 2, 3], "top_k": 0})),
        ("match_request", json!({"rgb": [1, 2, 3], "colour": true})),
        ("mix_request", json!({"pa": 14, "qa": 0.04, "pb": 2, "qb": 0.04})),
        ("mix_request", json!({"pa": 1, "qa": 0.2, "pb": 2, "qb": 0.04})),
        ("mix_request", json!({"pa": 1, "qa": 0.04})),
        ("service_config", json!({"modle": "m.bin"})),
    ] {
        assert!(!schema(name).is_valid(&bad), "{name} accepted {bad}");
    }
}

#[test]
fn cli_errors_and_documented_config_match_their_schemas() {
    let d = tempfile::tempdir().unwrap();
    let (_, err) = failure(&pigmix(&[
        "match",
        "--lut",
        p(&d.path().join("none.bin")),
        "--rgb",
        "1,2,3",
    ]));
    assert_valid("error_response", &err);

    let doc = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/cli.md")).unwrap();
    let start = doc.find("```json").unwrap() + "```json".len();
    let end = start + doc[start..].find("```").unwrap();
    let example: Value = serde_json::from_str(&doc[start..end]).unwrap();
    assert_valid("service_config", &example);
    let path = d.path().join("service.json");
    std::fs::write(&path, example.to_string()).unwrap();
    ServiceConfig::load(&path).unwrap();
}
