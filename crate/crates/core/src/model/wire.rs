//! Server side of the bridge wire protocol, expressed over any endpoint.
//!
//! `dispatch` maps a path and JSON body to a status code and JSON reply.
//! Test servers and golden protocol fixtures both go through it, so the
//! client in this crate and any conforming bridge see the same shapes.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use super::{HealthResponse, ModelEndpoint};
use crate::error::{Error, ErrorCode, Result};

pub const TOKENIZE: &str = "/v1/tokenize";
pub const LABEL_LOGITS: &str = "/v1/label_logits";
pub const GENERATE: &str = "/v1/generate";
pub const LOGPROBS: &str = "/v1/logprobs";
pub const HEALTH: &str = "/v1/health";

/// Structured error body returned with any non-2xx status.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        ErrorBody {
            code: e.code().as_str().to_string(),
            message: e.message().to_string(),
        }
    }
}

impl ErrorBody {
    pub fn into_error(self, status: u16) -> Error {
        let code = serde_json::from_value::<ErrorCode>(Value::String(self.code.clone()))
            .unwrap_or(ErrorCode::Endpoint);
        Error::new(code, format!("HTTP {status} {}: {}", self.code, self.message))
    }
}

fn call<Req, Resp>(body: &Value, f: impl FnOnce(&Req) -> Result<Resp>) -> (u16, Value)
where
    Req: DeserializeOwned,
    Resp: Serialize,
{
    let req: Req = match serde_json::from_value(body.clone()) {
        Ok(r) => r,
        Err(e) => {
            let err = Error::new(ErrorCode::Parse, e.to_string());
            return (400, json!(ErrorBody::from(&err)));
        }
    };
    match f(&req) {
        Ok(resp) => (200, serde_json::to_value(resp).unwrap_or(Value::Null)),
        Err(e) => (422, json!(ErrorBody::from(&e))),
    }
}

pub fn dispatch(endpoint: &dyn ModelEndpoint, path: &str, body: &Value) -> (u16, Value) {
    match path {
        TOKENIZE => call(body, |r| endpoint.tokenize(r)),
        LABEL_LOGITS => call(body, |r| endpoint.label_logits(r)),
        GENERATE => call(body, |r| endpoint.generate(r)),
        LOGPROBS => call(body, |r| endpoint.logprobs(r)),
        HEALTH => (
            200,
            json!(HealthResponse {
                status: "ok".into(),
                model: endpoint.descriptor(),
            }),
        ),
        other => (
            404,
            json!(ErrorBody {
                code: "NOT_FOUND".into(),
                message: format!("no route {other}"),
            }),
        ),
    }
}
