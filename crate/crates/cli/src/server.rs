//! Read-only HTTP inference service over a loaded bundle.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lesion_risk::bundle::{ModelBundle, PredictResponse};
use lesion_risk::dataset::{LesionRecord, RecordInput};
use lesion_risk::{FieldError, Result as CoreResult};
use serde::Serialize;
use serde_json::{json, Value};

/// Environment variable that overrides the bind address.
pub const ADDR_ENV: &str = "LESION_RISK_ADDR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<FieldError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
}

enum ApiError {
    Malformed(String),
    Invalid { message: String, fields: Vec<FieldError>, index: Option<usize> },
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Malformed(message) => (
                StatusCode::BAD_REQUEST,
                ErrorBody { error: "malformed_json", message, fields: Vec::new(), index: None },
            ),
            ApiError::Invalid { message, fields, index } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                ErrorBody { error: "validation", message, fields, index },
            ),
            ApiError::Internal(message) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                ErrorBody { error: "internal", message, fields: Vec::new(), index: None },
            ),
        };
        (status, Json(body)).into_response()
    }
}

fn to_record(input: RecordInput, index: Option<usize>) -> Result<LesionRecord, ApiError> {
    input.into_record().map_err(|e| ApiError::Invalid {
        message: e.to_string(),
        fields: e.field_errors().map(<[FieldError]>::to_vec).unwrap_or_default(),
        index,
    })
}

fn internal<T>(r: CoreResult<T>) -> Result<T, ApiError> {
    r.map_err(|e| ApiError::Internal(e.to_string()))
}

async fn predict(State(b): State<Arc<ModelBundle>>, body: Bytes) -> Result<Json<PredictResponse>, ApiError> {
    let input: RecordInput = serde_json::from_slice(&body).map_err(|e| ApiError::Malformed(e.to_string()))?;
    let record = to_record(input, None)?;
    Ok(Json(internal(b.predict(&record))?))
}

async fn predict_batch(
    State(b): State<Arc<ModelBundle>>,
    body: Bytes,
) -> Result<Json<Vec<PredictResponse>>, ApiError> {
    let inputs: Vec<RecordInput> = serde_json::from_slice(&body).map_err(|e| ApiError::Malformed(e.to_string()))?;
    let records = inputs
        .into_iter()
        .enumerate()
        .map(|(i, input)| to_record(input, Some(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let out = records.iter().map(|r| b.predict(r)).collect::<CoreResult<Vec<_>>>();
    Ok(Json(internal(out)?))
}

/// Metadata and the coefficient table.
pub fn model_summary(b: &ModelBundle) -> Value {
    let m = &b.model;
    let coefficients: Vec<Value> = m
        .coefficients()
        .into_iter()
        .map(|(feature, weight)| json!({ "feature": feature, "weight": weight }))
        .collect();
    json!({
        "model_version": b.metadata.model_version,
        "schema_version": b.schema_version,
        "created_at": b.metadata.created_at,
        "dataset_sha256": b.metadata.dataset_sha256,
        "alpha": b.alpha(),
        "n_leaves": b.subgroups.as_ref().map(|s| s.tree.n_leaves()),
        "features": m.encoder.features.iter().map(|f| f.name()).collect::<Vec<_>>(),
        "tree_features": b.tree_features().map(|fs| fs.iter().map(|f| f.name()).collect::<Vec<_>>()),
        "c": m.c,
        "intercept": m.intercept,
        "coefficients": coefficients,
        "cv_log_loss": m.training.cv_log_loss,
        "n_train": m.training.n_train,
    })
}

/// One entry per leaf: calibration summary, rule path and profile.
pub fn leaves_summary(b: &ModelBundle) -> CoreResult<Value> {
    let s = b.calibrated()?;
    let leaves: Vec<Value> = s
        .calibration
        .leaves
        .iter()
        .map(|l| {
            let rules: Vec<String> = s
                .tree
                .path_to(l.leaf_id)
                .unwrap_or_default()
                .iter()
                .map(|p| p.describe())
                .collect();
            json!({
                "leaf_id": l.leaf_id,
                "k": l.k,
                "alpha_tilde": l.alpha_tilde,
                "q": l.q,
                "cutoff": 1.0 - l.q,
                "fallback_used": l.fallback_used,
                "rule_path": rules,
                "profile": s.profiles.iter().find(|p| p.leaf_id == l.leaf_id),
            })
        })
        .collect();
    Ok(json!({
        "alpha": s.calibration.alpha,
        "pooled": s.calibration.pooled,
        "leaves": leaves,
    }))
}

async fn model(State(b): State<Arc<ModelBundle>>) -> Json<Value> {
    Json(model_summary(&b))
}

async fn leaves(State(b): State<Arc<ModelBundle>>) -> Result<Json<Value>, ApiError> {
    Ok(Json(internal(leaves_summary(&b))?))
}

async fn healthz() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

/// Routes over an immutable, calibrated bundle.
pub fn router(bundle: Arc<ModelBundle>) -> CoreResult<Router> {
    bundle.calibrated()?;
    Ok(Router::new()
        .route("/v1/predict", post(predict))
        .route("/v1/predict/batch", post(predict_batch))
        .route("/v1/model", get(model))
        .route("/v1/leaves", get(leaves))
        .route("/healthz", get(healthz))
        .with_state(bundle))
}

pub async fn serve(bundle: ModelBundle, addr: SocketAddr) -> anyhow::Result<()> {
    let app = router(Arc::new(bundle))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
