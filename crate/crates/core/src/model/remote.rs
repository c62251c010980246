//! Blocking HTTP client for a bridge that speaks the `/v1` wire protocol.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::wire::{self, ErrorBody};
use super::{
    Capabilities, GenerateRequest, GenerateResponse, HealthResponse, LabelLogitsRequest,
    LabelLogitsResponse, LogprobsRequest, LogprobsResponse, ModelEndpoint, TokenizeRequest,
    TokenizeResponse,
};
use crate::error::{Error, ErrorCode, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub base_url: String,
    /// Overrides the descriptor reported by `/v1/health`.
    pub model: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: "http://127.0.0.1:8000".into(),
            model: None,
            timeout_secs: 120,
            retries: 2,
            backoff_ms: 200,
        }
    }
}

pub struct RemoteEndpoint {
    config: RemoteConfig,
    agent: ureq::Agent,
    descriptor: String,
}

impl std::fmt::Debug for RemoteEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEndpoint")
            .field("base_url", &self.config.base_url)
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl RemoteEndpoint {
    /// Builds the client without contacting the server. The descriptor is
    /// `config.model` or the base URL.
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let descriptor = config
            .model
            .clone()
            .unwrap_or_else(|| format!("remote:{}", config.base_url));
        RemoteEndpoint {
            config,
            agent,
            descriptor,
        }
    }

    /// Builds the client and takes the descriptor from `/v1/health` unless
    /// the config pins one.
    pub fn connect(config: RemoteConfig) -> Result<Self> {
        let mut ep = RemoteEndpoint::new(config);
        let health = ep.health()?;
        if ep.config.model.is_none() {
            ep.descriptor = health.model;
        }
        Ok(ep)
    }

    pub fn health(&self) -> Result<HealthResponse> {
        self.with_retries(|| {
            let resp = self.agent.get(&self.url(wire::HEALTH)).call();
            Self::decode(resp)
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.config.base_url.trim_end_matches('/'))
    }

    fn decode<T: DeserializeOwned>(
        resp: std::result::Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<T> {
        let mut resp = resp.map_err(|e| Error::new(ErrorCode::Transport, e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::new(ErrorCode::Transport, e.to_string()))?;
        if (200..300).contains(&status) {
            return serde_json::from_str(&text)
                .map_err(|e| Error::new(ErrorCode::Endpoint, format!("bad response body: {e}")));
        }
        let code = if status >= 500 { ErrorCode::Transport } else { ErrorCode::Endpoint };
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) if status < 500 => Err(body.into_error(status)),
            _ => Err(Error::new(code, format!("HTTP {status}: {text}"))),
        }
    }

    fn with_retries<T>(&self, mut f: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            match f() {
                Err(e) if e.code() == ErrorCode::Transport && attempt < self.config.retries => {
                    let wait = self.config.backoff_ms.saturating_mul(1 << attempt.min(10));
                    log::warn!("retrying after transport error: {e}");
                    std::thread::sleep(Duration::from_millis(wait));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, req: &Req) -> Result<Resp> {
        let url = self.url(path);
        self.with_retries(|| Self::decode(self.agent.post(&url).send_json(req)))
    }
}

impl ModelEndpoint for RemoteEndpoint {
    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }

    fn tokenize(&self, req: &TokenizeRequest) -> Result<TokenizeResponse> {
        self.post(wire::TOKENIZE, req)
    }

    fn label_logits(&self, req: &LabelLogitsRequest) -> Result<LabelLogitsResponse> {
        let resp: LabelLogitsResponse = self.post(wire::LABEL_LOGITS, req)?;
        if resp.logits.len() != req.labels.len() {
            return Err(Error::new(
                ErrorCode::Endpoint,
                format!("{} logits for {} labels", resp.logits.len(), req.labels.len()),
            ));
        }
        Ok(resp)
    }

    fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse> {
        self.post(wire::GENERATE, req)
    }

    fn logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse> {
        self.post(wire::LOGPROBS, req)
    }
}
