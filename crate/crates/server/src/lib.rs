//! HTTP API over [`nutrivision_core::Engine`].
//!
//! Success bodies are the canonical JSON of the matching library call, so a
//! client sees exactly the bytes the CLI would print. Errors are
//! `{"code": ..., "message": ...}` with the status from [`ErrorCode`].

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Serialize;

use nutrivision_core::canonical;
use nutrivision_core::engine::{Ack, FeedbackRequest, MealRequest};
use nutrivision_core::error::Error;
use nutrivision_core::recommender::ProfileUpsert;
use nutrivision_core::{Engine, ErrorCode};

pub const DEFAULT_RECOMMENDATIONS: usize = 5;
pub const MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn schema(message: impl Into<String>) -> Self {
        Self {
            status: 400,
            code: "SCHEMA_ERROR".into(),
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            status: 500,
            code: "INTERNAL".into(),
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self {
            status: e.http_status(),
            code: e.code().into(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = canonical::to_string(&self).unwrap_or_default();
        (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn json_response<T: Serialize>(value: &T) -> ApiResult {
    let body = canonical::to_string(value).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::schema(e.to_string()))
}

/// Runs CPU-bound engine work off the async executor.
async fn blocking<T, F>(engine: &Arc<Engine>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> Result<T, Error> + Send + 'static,
{
    let engine = engine.clone();
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(ApiError::from)
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/v1/analyze", post(analyze))
        .route("/v1/users", post(upsert_user))
        .route("/v1/users/{id}", get(get_user))
        .route("/v1/users/{id}/bmi", get(bmi))
        .route("/v1/users/{id}/meals", post(log_meal))
        .route("/v1/users/{id}/feedback", post(feedback))
        .route("/v1/users/{id}/recommendations", get(recommendations))
        .route("/v1/recipes", get(list_recipes))
        .route("/v1/recipes/{id}", get(get_recipe))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(engine)
}

async fn analyze(State(engine): State<Arc<Engine>>, mut form: Multipart) -> ApiResult {
    let mut image = None;
    let mut detections = None;
    while let Some(field) = form.next_field().await.map_err(|e| ApiError::schema(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let data = field.bytes().await.map_err(|e| ApiError::schema(e.to_string()))?;
        match name.as_str() {
            "image" => image = Some(data),
            "detections" => detections = Some(data),
            _ => {}
        }
    }
    let image = image.ok_or_else(|| ApiError::schema("missing multipart field `image`"))?;
    let detections = detections.ok_or_else(|| ApiError::schema("missing multipart field `detections`"))?;
    let report = blocking(&engine, move |e| e.analyze(&image, &detections)).await?;
    json_response(&report)
}

async fn upsert_user(State(engine): State<Arc<Engine>>, body: Bytes) -> ApiResult {
    let profile: ProfileUpsert = parse_body(&body)?;
    let sequence = blocking(&engine, move |e| e.upsert_profile(profile)).await?;
    json_response(&Ack { sequence })
}

async fn get_user(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult {
    json_response(&engine.profile(&id)?)
}

async fn bmi(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult {
    json_response(&engine.bmi(&id)?)
}

async fn log_meal(State(engine): State<Arc<Engine>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let meal: MealRequest = parse_body(&body)?;
    let sequence = blocking(&engine, move |e| e.log_meal(&id, meal)).await?;
    json_response(&Ack { sequence })
}

async fn feedback(State(engine): State<Arc<Engine>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let request: FeedbackRequest = parse_body(&body)?;
    let sequence = blocking(&engine, move |e| e.submit_feedback(&id, request)).await?;
    json_response(&Ack { sequence })
}

async fn recommendations(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult {
    let count = match query.get("count") {
        Some(raw) => raw
            .parse::<usize>()
            .map_err(|_| ApiError::schema(format!("count must be a non-negative integer, got `{raw}`")))?,
        None => DEFAULT_RECOMMENDATIONS,
    };
    let recs = blocking(&engine, move |e| e.recommend(&id, count)).await?;
    json_response(&recs)
}

async fn list_recipes(State(engine): State<Arc<Engine>>) -> ApiResult {
    json_response(&engine.recipes().recipes())
}

async fn get_recipe(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult {
    json_response(&engine.recipe(&id)?)
}

/// Serves until ctrl-c.
pub async fn serve(engine: Arc<Engine>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(engine, listener).await
}

pub async fn serve_on(engine: Arc<Engine>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
