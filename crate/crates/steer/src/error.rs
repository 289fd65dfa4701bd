use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("unknown export format `{0}`")]
    UnknownFormat(String),
    #[error("session has no best ladder yet")]
    NoSnapshot,
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Core(#[from] mll_core::Error),
    #[error("persisting run: {0}")]
    Io(#[from] std::io::Error),
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self {
            Self::UnknownSession(_) | Self::UnknownFamily(_) => StatusCode::NOT_FOUND,
            Self::NoSnapshot => StatusCode::CONFLICT,
            Self::UnknownFormat(_) | Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            Self::Core(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
