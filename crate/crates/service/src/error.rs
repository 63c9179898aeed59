use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use patternwise_core::Error;
use serde_json::{json, Value};

use crate::store::StoreError;

/// Error response: `{"error": {"code", "message", "details"}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "error": {
                "code": self.code,
                "message": self.message,
                "details": self.details,
            }
        });
        (self.status, Json(body)).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        use StatusCode as S;
        let message = e.to_string();
        match e {
            Error::UnknownKb(id) => {
                ApiError::new(S::NOT_FOUND, "unknown_kb", message).with_details(json!({ "kb": id }))
            }
            Error::NotControlLevel(id) => {
                ApiError::new(S::UNPROCESSABLE_ENTITY, "not_control_level", message)
                    .with_details(json!({ "kb": id }))
            }
            Error::UnknownProperty { kb, property } => {
                ApiError::new(S::UNPROCESSABLE_ENTITY, "unknown_property", message)
                    .with_details(json!({ "kb": kb, "property": property }))
            }
            Error::ValueOutOfDomain {
                property,
                value,
                domain,
            } => ApiError::new(S::UNPROCESSABLE_ENTITY, "value_out_of_domain", message)
                .with_details(json!({ "property": property, "value": value, "domain": domain })),
            Error::ContextViolation(ids) => {
                ApiError::new(S::CONFLICT, "context_violation", message)
                    .with_details(json!({ "constraints": ids }))
            }
            Error::WrongState { expected, actual } => {
                ApiError::new(S::CONFLICT, "wrong_state", message)
                    .with_details(json!({ "expected": expected, "actual": actual }))
            }
            Error::AlreadyAnswered(p) => ApiError::new(S::CONFLICT, "already_answered", message)
                .with_details(json!({ "property": p })),
            Error::NotAnswered(p) => ApiError::new(S::CONFLICT, "not_answered", message)
                .with_details(json!({ "property": p })),
            Error::NotRecommended(p) => {
                ApiError::new(S::UNPROCESSABLE_ENTITY, "not_recommended", message)
                    .with_details(json!({ "pattern": p }))
            }
            Error::EmptyFeasibleSet => ApiError::new(S::CONFLICT, "empty_feasible_set", message),
            Error::IncompleteContext(missing) => {
                ApiError::new(S::CONFLICT, "incomplete_context", message)
                    .with_details(json!({ "unanswered": missing }))
            }
            _ => ApiError::internal(message),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::InvalidId(id) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_session_id", message)
                    .with_details(json!({ "id": id }))
            }
            StoreError::NotFound(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "session_not_found", message)
                    .with_details(json!({ "id": id }))
            }
            StoreError::MigrationRequired {
                found, expected, ..
            } => ApiError::new(StatusCode::CONFLICT, "migration_required", message)
                .with_details(json!({ "found": found, "expected": expected })),
            StoreError::Corrupt { .. } => ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "corrupt_snapshot",
                message,
            ),
            StoreError::Io { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_io", message)
            }
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", r.body_text())
    }
}
