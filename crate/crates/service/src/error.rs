use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use liverkg::dss::{PlanError, ReportError, SessionError};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    Conflict,
    PreconditionFailed,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::PreconditionFailed => StatusCode::PRECONDITION_FAILED,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::PreconditionFailed, message)
    }

    /// Logs the cause and returns a generic message.
    pub fn internal(cause: impl std::fmt::Display) -> Self {
        eprintln!("internal error: {cause}");
        Self::new(ErrorCode::Internal, "internal error")
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::InvalidTransition { state, action } => ApiError::precondition(message)
                .with_detail(json!({ "state": state, "action": action })),
            SessionError::Record(_) => ApiError::bad_request(message),
            SessionError::Report(ReportError::Conflict {
                line,
                key,
                first,
                second,
            }) => ApiError::new(ErrorCode::Conflict, message).with_detail(json!({
                "line": line,
                "key": key,
                "first": first,
                "second": second,
            })),
            SessionError::Plan(PlanError::MissingHcvRna) => ApiError::bad_request(message),
            SessionError::Plan(PlanError::NoTreatment) => ApiError::precondition(message),
            SessionError::Plan(PlanError::Eval(e)) | SessionError::Eval(e) => ApiError::internal(e),
        }
    }
}
