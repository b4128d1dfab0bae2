use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::{DateTime, Utc};
use http_body_util::BodyExt;
use nutrivision_core::{canonical, Config, Engine};
use nutrivision_server::router;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn engine(dir: &tempfile::TempDir) -> Arc<Engine> {
    let mut cfg = Config::default();
    cfg.store.path = dir.path().join("events.log");
    let now = DateTime::parse_from_rfc3339("2026-03-01T12:00:00Z").unwrap().with_timezone(&Utc);
    Arc::new(Engine::open(cfg).unwrap().with_clock(Arc::new(move || now)))
}

const BOUNDARY: &str = "nvboundary7d1c";

fn multipart(parts: &[(&str, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, data) in parts {
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}\"\r\n\r\n")
                .as_bytes(),
        );
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

async fn send(engine: &Arc<Engine>, req: Request<Body>) -> (StatusCode, String) {
    let res = router(engine.clone()).oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn analyze(engine: &Arc<Engine>, image: &[u8], detections: &[u8]) -> (StatusCode, String) {
    let req = Request::post("/v1/analyze")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(&[("image", image), ("detections", detections)])))
        .unwrap();
    send(engine, req).await
}

async fn get(engine: &Arc<Engine>, uri: &str) -> (StatusCode, String) {
    send(engine, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post_json(engine: &Arc<Engine>, uri: &str, body: Value) -> (StatusCode, String) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(engine, req).await
}

fn code(body: &str) -> String {
    serde_json::from_str::<Value>(body).unwrap()["code"].as_str().unwrap().to_string()
}

fn profile(id: &str, diet: &str) -> Value {
    json!({
        "user_id": id,
        "height_m": 1.75,
        "weight_kg": 70.0,
        "gender": "female",
        "diet_pref": diet,
        "health_history": "diabetic, wants high fiber low sugar meals",
        "sugar_limit_g": 20.0,
        "carb_limit_g": 50.0
    })
}

fn scores(body: &str) -> Vec<(String, f64)> {
    serde_json::from_str::<Vec<Value>>(body)
        .unwrap()
        .iter()
        .map(|r| (r["recipe_id"].as_str().unwrap().to_string(), r["score"].as_f64().unwrap()))
        .collect()
}

#[tokio::test]
async fn analyze_matches_golden_and_library() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let image = fixture("plate.png");
    let dets = fixture("plate_detections.json");
    let (status, body) = analyze(&e, &image, &dets).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body.as_bytes(), fixture("plate_report.json"));
    let library = canonical::to_string(&e.analyze(&image, &dets).unwrap()).unwrap();
    assert_eq!(body, library);
}

#[tokio::test]
async fn analyze_errors() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let dets = br#"{"image_width": 320, "image_height": 240, "detections": []}"#;
    let (status, body) = analyze(&e, &fixture("no_coin.png"), dets).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(code(&body), "NO_REFERENCE_FOUND");

    let (status, body) = analyze(&e, &fixture("plate.png"), b"{\"detections\": 3").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(code(&body), "SCHEMA_ERROR");

    let (status, body) = analyze(&e, b"not an image", &fixture("plate_detections.json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(code(&body), "INVALID_IMAGE");

    let req = Request::post("/v1/analyze")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(&[("image", &fixture("plate.png"))])))
        .unwrap();
    let (status, body) = send(&e, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(code(&body), "SCHEMA_ERROR");
}

#[tokio::test]
async fn profile_and_bmi() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let (status, body) = post_json(&e, "/v1/users", profile("u1", "vegan")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, "{\n  \"sequence\": 1\n}\n");
    let (status, body) = get(&e, "/v1/users/u1/bmi").await;
    assert_eq!(status, StatusCode::OK);
    let bmi: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(bmi["category"], "normal");
    assert!((bmi["value"].as_f64().unwrap() - 70.0 / (1.75 * 1.75)).abs() < 1e-6);

    let (status, body) = get(&e, "/v1/users/u1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, canonical::to_string(&e.profile("u1").unwrap()).unwrap());

    let (status, body) = get(&e, "/v1/users/nobody/bmi").await;
    assert_eq!((status, code(&body).as_str()), (StatusCode::NOT_FOUND, "UNKNOWN_USER"));

    let mut bad = profile("u2", "vegan");
    bad["height_m"] = json!(0.0);
    let (status, body) = post_json(&e, "/v1/users", bad).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    let (status, _) = post_json(&e, "/v1/users", json!({"user_id": "u3"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn recommendations_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    post_json(&e, "/v1/users", profile("u1", "vegan")).await;

    let (status, body) = get(&e, "/v1/users/u1/recommendations").await;
    assert_eq!(status, StatusCode::OK);
    let recs = scores(&body);
    assert_eq!(recs.len(), 5);
    assert!(recs.windows(2).all(|w| w[0].1 >= w[1].1));
    for (id, _) in &recs {
        assert_eq!(e.recipe(id).unwrap().diet_tag, nutrivision_core::DietTag::Vegan);
    }
    assert_eq!(body, canonical::to_string(&e.recommend("u1", 5).unwrap()).unwrap());

    let (_, body) = get(&e, "/v1/users/u1/recommendations?count=2").await;
    assert_eq!(scores(&body).len(), 2);
    let (status, body) = get(&e, "/v1/users/ghost/recommendations").await;
    assert_eq!((status, code(&body).as_str()), (StatusCode::NOT_FOUND, "UNKNOWN_USER"));
    let (status, _) = get(&e, "/v1/users/u1/recommendations?count=-1").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn feedback_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    post_json(&e, "/v1/users", profile("u1", "non-vegetarian")).await;

    let (status, body) = post_json(
        &e,
        "/v1/users/u1/feedback",
        json!({"recipe_id": "r03", "tried": true, "rating": 5}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, "{\n  \"sequence\": 2\n}\n");

    let (status, body) = post_json(
        &e,
        "/v1/users/u1/feedback",
        json!({"recipe_id": "r03", "tried": true, "rating": 9}),
    )
    .await;
    assert_eq!((status, code(&body).as_str()), (StatusCode::BAD_REQUEST, "INVALID_RATING"));
    let (status, body) = post_json(&e, "/v1/users/ghost/feedback", json!({"recipe_id": "r03", "tried": false})).await;
    assert_eq!((status, code(&body).as_str()), (StatusCode::NOT_FOUND, "UNKNOWN_USER"));
    let (status, body) = post_json(&e, "/v1/users/u1/feedback", json!({"recipe_id": "zz", "tried": false})).await;
    assert_eq!((status, code(&body).as_str()), (StatusCode::NOT_FOUND, "UNKNOWN_RECIPE"));
}

#[tokio::test]
async fn skip_lowers_score_by_delta() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    post_json(&e, "/v1/users", profile("u1", "non-vegetarian")).await;
    let (_, before) = get(&e, "/v1/users/u1/recommendations?count=18").await;
    let before = scores(&before);
    let (target, target_score) = before[0].clone();

    let (status, _) = post_json(&e, "/v1/users/u1/feedback", json!({"recipe_id": target, "tried": false})).await;
    assert_eq!(status, StatusCode::OK);
    let (_, after) = get(&e, "/v1/users/u1/recommendations?count=18").await;
    let after = scores(&after);
    let delta = e.config().recommender.delta;
    for (id, score) in &after {
        let old = before.iter().find(|(b, _)| b == id).unwrap().1;
        let expected = if *id == target { target_score - delta } else { old };
        assert!((score - expected).abs() <= 2e-6, "{id}: {score} vs {expected}");
    }
}

#[tokio::test]
async fn meals_feed_deficiency_boost() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    post_json(&e, "/v1/users", profile("u1", "non-vegetarian")).await;
    let (_, before) = get(&e, "/v1/users/u1/recommendations?count=18").await;

    let report: Value = serde_json::from_slice(&fixture("plate_report.json")).unwrap();
    let (status, body) = post_json(
        &e,
        "/v1/users/u1/meals",
        json!({"timestamp": "2026-03-01T08:00:00Z", "report": report}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(e.profile("u1").unwrap().meal_log.len(), 1);

    let (_, after) = get(&e, "/v1/users/u1/recommendations?count=18").await;
    assert_ne!(before, after);
    assert_eq!(after, canonical::to_string(&e.recommend("u1", 18).unwrap()).unwrap());

    let (status, body) = post_json(&e, "/v1/users/ghost/meals", json!({"report": report})).await;
    assert_eq!((status, code(&body).as_str()), (StatusCode::NOT_FOUND, "UNKNOWN_USER"));
}

#[tokio::test]
async fn recipes() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let (status, body) = get(&e, "/v1/recipes/r01").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, canonical::to_string(&e.recipe("r01").unwrap()).unwrap());
    let (status, body) = get(&e, "/v1/recipes/r99").await;
    assert_eq!((status, code(&body).as_str()), (StatusCode::NOT_FOUND, "UNKNOWN_RECIPE"));
    let (status, body) = get(&e, "/v1/recipes").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Vec<Value>>(&body).unwrap().len(), 18);
}

#[tokio::test]
async fn served_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(nutrivision_server::serve_on(e, listener));
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    stream
        .write_all(b"GET /v1/recipes/r01 HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut out = String::new();
    stream.read_to_string(&mut out).await.unwrap();
    assert!(out.starts_with("HTTP/1.1 200"), "{out}");
}
