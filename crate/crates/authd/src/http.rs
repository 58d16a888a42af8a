//! HTTP/1.1 JSON front end for [`Gateway`].

use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use prnu_core::fingerprint::decode_prnufp;
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;

use crate::{resolve_frames_ref, Gateway, GatewayError};

#[derive(Debug, Clone, Copy)]
pub struct HttpOptions {
    pub max_body_bytes: usize,
    pub allow_frame_paths: bool,
}

impl Default for HttpOptions {
    fn default() -> Self {
        HttpOptions {
            max_body_bytes: 512 << 20,
            allow_frame_paths: true,
        }
    }
}

#[derive(Clone)]
struct AppState {
    gateway: Arc<Gateway>,
    options: HttpOptions,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterBody {
    user_id: String,
    password: String,
    frames_ref: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JoinBody {
    user_id: String,
    #[serde(default)]
    frames_ref: Option<String>,
    /// Base64 `PRNUFP1` computed by the participant.
    #[serde(default)]
    fingerprint: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PasswordBody {
    challenge_token: String,
    password: String,
}

struct ApiError(GatewayError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            GatewayError::InvalidUserId(_) | GatewayError::InvalidInput(_) => StatusCode::BAD_REQUEST,
            GatewayError::Duplicate(_) => StatusCode::CONFLICT,
            GatewayError::InsufficientFrames { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            GatewayError::InvalidToken(_) => StatusCode::UNAUTHORIZED,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let body = json!({ "error": self.0.kind(), "message": self.0.to_string() });
        (status, Json(body)).into_response()
    }
}

fn bad_json(rejection: JsonRejection) -> Response {
    let body = json!({ "error": "bad_request", "message": rejection.body_text() });
    (StatusCode::BAD_REQUEST, Json(body)).into_response()
}

async fn blocking<T: Send + 'static>(
    work: impl FnOnce() -> Result<T, GatewayError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(work)
        .await
        .map_err(|e| ApiError(GatewayError::Internal(e.to_string())))?
        .map_err(ApiError)
}

async fn register(State(st): State<AppState>, body: Result<Json<RegisterBody>, JsonRejection>) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(r) => return bad_json(r),
    };
    let gw = st.gateway.clone();
    let allow = st.options.allow_frame_paths;
    let result = blocking(move || {
        let frames = resolve_frames_ref(&body.frames_ref, allow)?;
        gw.register_user(&body.user_id, &frames, &body.password)
    })
    .await;
    match result {
        Ok(rec) => (
            StatusCode::CREATED,
            Json(json!({
                "user_id": rec.user_id,
                "registered_at": rec.registered_at,
                "frames_used": rec.fingerprint.frames_used(),
                "width": rec.fingerprint.width(),
                "height": rec.fingerprint.height(),
            })),
        )
            .into_response(),
        Err(e) => e.into_response(),
    }
}

async fn join(State(st): State<AppState>, body: Result<Json<JoinBody>, JsonRejection>) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(r) => return bad_json(r),
    };
    let gw = st.gateway.clone();
    let allow = st.options.allow_frame_paths;
    let result = blocking(move || match (body.frames_ref, body.fingerprint) {
        (Some(frames_ref), None) => {
            let frames = resolve_frames_ref(&frames_ref, allow)?;
            gw.request_join(&body.user_id, &frames)
        }
        (None, Some(encoded)) => {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(encoded.trim())
                .map_err(|e| GatewayError::InvalidInput(format!("fingerprint is not base64: {e}")))?;
            let fp = decode_prnufp(&bytes, "participant", chrono::Utc::now())
                .map_err(|e| GatewayError::InvalidInput(e.to_string()))?;
            gw.request_join_fingerprint(&body.user_id, &fp)
        }
        _ => Err(GatewayError::InvalidInput(
            "exactly one of frames_ref and fingerprint is required".into(),
        )),
    })
    .await;
    match result {
        Ok(r) => Json(json!({
            "decision": r.outcome.decision,
            "pce": r.outcome.pce_report.map(|p| p.pce),
            "pce_report": r.outcome.pce_report,
            "challenge_token": r.challenge_token,
            "session_id": r.outcome.session_id,
            "user_id": r.outcome.user_id,
            "reason": r.outcome.reason,
        }))
        .into_response(),
        Err(e) => e.into_response(),
    }
}

async fn password(State(st): State<AppState>, body: Result<Json<PasswordBody>, JsonRejection>) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(r) => return bad_json(r),
    };
    let gw = st.gateway.clone();
    match blocking(move || gw.submit_password(&body.challenge_token, &body.password)).await {
        Ok(r) => Json(json!({
            "decision": r.outcome.decision,
            "attempts_remaining": r.attempts_remaining,
            "user_id": r.outcome.user_id,
            "session_id": r.outcome.session_id,
        }))
        .into_response(),
        Err(e) => e.into_response(),
    }
}

async fn audit(State(st): State<AppState>) -> Response {
    let gw = st.gateway.clone();
    match blocking(move || gw.audit().snapshot()).await {
        Ok(text) => ([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response(),
        Err(e) => e.into_response(),
    }
}

pub fn router(gateway: Arc<Gateway>, options: HttpOptions) -> Router {
    Router::new()
        .route("/register", post(register))
        .route("/join", post(join))
        .route("/password", post(password))
        .route("/audit", get(audit))
        .layer(DefaultBodyLimit::max(options.max_body_bytes))
        .with_state(AppState { gateway, options })
}

/// Serves until `shutdown` resolves, then persists the store and syncs the
/// audit log.
pub async fn serve(
    gateway: Arc<Gateway>,
    listener: TcpListener,
    options: HttpOptions,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), GatewayError> {
    let app = router(gateway.clone(), options);
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| GatewayError::Internal(format!("server: {e}")))?;
    let gw = gateway;
    tokio::task::spawn_blocking(move || gw.flush())
        .await
        .map_err(|e| GatewayError::Internal(e.to_string()))?
}
