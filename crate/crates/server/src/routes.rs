use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sqlia_core::alarm_queue::{AlarmError, Decision};
use sqlia_core::pattern_store::{AddOutcome, StoreError};
use tower_http::cors::CorsLayer;

use crate::api::*;
use crate::AppState;

type Shared = Arc<AppState>;

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(status = %self.status, error = %self.message, "request failed");
        }
        (
            self.status,
            Json(ErrorBody {
                error: self.message,
            }),
        )
            .into_response()
    }
}

impl From<AlarmError> for ApiError {
    fn from(e: AlarmError) -> Self {
        let status = match &e {
            AlarmError::UnknownAlarm(_) => StatusCode::NOT_FOUND,
            AlarmError::AlreadyDecided(_) => StatusCode::CONFLICT,
            AlarmError::EmptyPattern | AlarmError::InvalidEncoding | AlarmError::NotAnAlarm(_) => {
                StatusCode::BAD_REQUEST
            }
            AlarmError::Store(StoreError::EmptyPattern | StoreError::InvalidEncoding) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::EmptyPattern | StoreError::InvalidEncoding => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

/// Parses a JSON body, mapping every failure to 400. Unknown fields are ignored.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

async fn blocking<T, F>(state: &Shared, f: F) -> Result<T, ApiError>
where
    F: FnOnce(&AppState) -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn check(State(state): State<Shared>, body: Bytes) -> Result<Json<CheckResponse>, ApiError> {
    let req: CheckRequest = parse_body(&body)?;
    let policy = state.policy();
    let outcome = blocking(&state, move |s| Ok(s.check(&req.query)?)).await?;
    Ok(Json(CheckResponse::new(
        &outcome.verdict,
        outcome.alarm.map(|a| a.id),
        policy,
    )))
}

async fn list_patterns(State(state): State<Shared>) -> Json<PatternList> {
    let snapshot = state.store().snapshot();
    Json(PatternList {
        patterns: snapshot.iter().map(PatternView::from).collect(),
    })
}

async fn add_pattern(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: AddPatternRequest = parse_body(&body)?;
    let outcome = blocking(&state, move |s| Ok(s.add_pattern(&req.text)?)).await?;
    let (status, pattern, created) = match outcome {
        AddOutcome::Added(p) => (StatusCode::CREATED, p, true),
        AddOutcome::AlreadyPresent(id) => {
            let p = state.store().get(id).expect("existing pattern id");
            (StatusCode::OK, p, false)
        }
    };
    Ok((
        status,
        Json(AddPatternResponse {
            pattern: PatternView::from(&pattern),
            created,
        }),
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
struct AlarmFilter {
    status: Option<String>,
}

async fn list_alarms(
    State(state): State<Shared>,
    Query(filter): Query<AlarmFilter>,
) -> Result<Json<AlarmList>, ApiError> {
    if let Some(status) = filter.status.as_deref() {
        if !matches!(status, "pending" | "confirmed" | "dismissed") {
            return Err(ApiError::bad_request(format!("unknown status {status:?}")));
        }
    }
    let compiled = state.compiled();
    let alarms = state
        .alarms()
        .list(filter.status.as_deref())
        .iter()
        .map(|r| AlarmView::new(r, &compiled))
        .collect();
    Ok(Json(AlarmList { alarms }))
}

async fn decide(
    State(state): State<Shared>,
    Path(id): Path<u64>,
    body: Bytes,
) -> Result<Json<AlarmView>, ApiError> {
    let req: DecisionRequest = parse_body(&body)?;
    let decision = match (req.action.as_str(), req.pattern_text) {
        ("dismiss", _) => Decision::Dismiss,
        ("confirm", Some(pattern_text)) => Decision::Confirm { pattern_text },
        ("confirm", None) => return Err(ApiError::bad_request("confirm requires pattern_text")),
        (other, _) => return Err(ApiError::bad_request(format!("unknown action {other:?}"))),
    };
    let record = blocking(&state, move |s| Ok(s.decide(id, decision)?)).await?;
    Ok(Json(AlarmView::new(&record, &state.compiled())))
}

async fn health(State(state): State<Shared>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        patterns: state.store().len(),
        pending_alarms: state.alarms().pending_count(),
    })
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/check", post(check))
        .route("/v1/patterns", get(list_patterns).post(add_pattern))
        .route("/v1/alarms", get(list_alarms))
        .route("/v1/alarms/{id}/decision", post(decide))
        .route("/v1/health", get(health))
        .layer(CorsLayer::permissive())
        .with_state(state)
}
