use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use redhunt_core::auclean::AuError;
use redhunt_core::decision::LogError;
use redhunt_core::elicitation::ElicitationError;
use redhunt_core::model::ModelError;
use redhunt_core::normalize::NormalizeError;
use redhunt_core::pipeline::PipelineError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    /// Phase violation or stale sequence number; `details` is merged into
    /// the body.
    #[error("{message}")]
    Conflict { message: String, details: serde_json::Value },
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn conflict(message: impl Into<String>) -> Self {
        ApiError::Conflict {
            message: message.into(),
            details: serde_json::Value::Null,
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict { .. } => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.to_string() });
        if let ApiError::Conflict { details: serde_json::Value::Object(extra), .. } = &self {
            body.as_object_mut().expect("object").extend(extra.clone());
        }
        (self.status(), Json(body)).into_response()
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UnknownRelation(_) | ModelError::UnknownAttribute { .. } => ApiError::NotFound(e.to_string()),
            ModelError::Io(_) => ApiError::Internal(e.to_string()),
            _ => ApiError::Unprocessable(e.to_string()),
        }
    }
}

impl From<ElicitationError> for ApiError {
    fn from(e: ElicitationError) -> Self {
        match e {
            ElicitationError::Model(m) => m.into(),
            ElicitationError::UnknownRelation(_) => ApiError::NotFound(e.to_string()),
            _ => ApiError::Unprocessable(e.to_string()),
        }
    }
}

impl From<AuError> for ApiError {
    fn from(e: AuError) -> Self {
        match e {
            AuError::Model(m) => m.into(),
            AuError::Elicitation(el) => el.into(),
            _ => ApiError::Unprocessable(e.to_string()),
        }
    }
}

impl From<NormalizeError> for ApiError {
    fn from(e: NormalizeError) -> Self {
        match e {
            NormalizeError::Model(m) => m.into(),
            _ => ApiError::Unprocessable(e.to_string()),
        }
    }
}

impl From<LogError> for ApiError {
    fn from(e: LogError) -> Self {
        match e {
            LogError::Io(_) => ApiError::Internal(e.to_string()),
            _ => ApiError::Unprocessable(e.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Model(m) => m.into(),
            PipelineError::Log(l) => l.into(),
            PipelineError::Elicitation(el) => el.into(),
            PipelineError::Au(a) => a.into(),
            PipelineError::Normalize(n) => n.into(),
            PipelineError::Io(_) => ApiError::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::Internal(e.to_string())
    }
}
