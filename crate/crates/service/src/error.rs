use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use crate::session::Status;

/// Error returned by every endpoint, rendered as `{code, message}`.
#[derive(Debug, Clone, PartialEq)]
pub enum ApiError {
    NotFound(String),
    /// The session is not in a state that accepts this request.
    Conflict { status: Status, message: String },
    Validation { field: Option<String>, message: String },
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'static str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    status: Option<Status>,
}

impl ApiError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self::Validation {
            field: None,
            message: message.into(),
        }
    }

    pub fn field(field: &str, message: impl Into<String>) -> Self {
        Self::Validation {
            field: Some(field.to_string()),
            message: message.into(),
        }
    }

    pub fn conflict(status: Status, action: &str) -> Self {
        Self::Conflict {
            status,
            message: format!("cannot {action}: session is {status}"),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::NotFound(_) => "not_found",
            Self::Conflict { .. } => "conflict",
            Self::Validation { .. } => "validation",
            Self::Internal(_) => "internal",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::NotFound(m) | Self::Internal(m) => m,
            Self::Conflict { message, .. } | Self::Validation { message, .. } => message,
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code(), self.message())
    }
}

impl std::error::Error for ApiError {}

impl From<egbo::Error> for ApiError {
    fn from(e: egbo::Error) -> Self {
        match e {
            egbo::Error::Input(m) => Self::validation(m),
            other => Self::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let code = match self {
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::Conflict { .. } => StatusCode::CONFLICT,
            Self::Validation { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody {
            code: self.code(),
            message: self.message(),
            field: match &self {
                Self::Validation { field, .. } => field.as_deref(),
                _ => None,
            },
            status: match &self {
                Self::Conflict { status, .. } => Some(*status),
                _ => None,
            },
        };
        (code, Json(body)).into_response()
    }
}
