//! Model endpoints: the request/response contract, the operations built on
//! it, and the in-context edit prefix.

mod cache;
mod mock;
mod remote;
pub mod wire;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, ErrorCode, Result};

pub use cache::{CachedEndpoint, CountingEndpoint};
pub use mock::{mock_tokenize, MockConfig, MockModel};
pub use remote::{RemoteConfig, RemoteEndpoint};

pub const DEFAULT_ICE_PREAMBLE: &str =
    "Please acknowledge the following new facts and use them to answer the question:";
pub const FACT_PREFIX: &str = "New Fact: ";
pub const PROMPT_MARKER: &str = "Prompt: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    Score,
    Generate,
    Logprobs,
    Tokenize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub score: bool,
    pub generate: bool,
    pub logprobs: bool,
    pub tokenize: bool,
}

impl Capabilities {
    pub const ALL: Capabilities = Capabilities {
        score: true,
        generate: true,
        logprobs: true,
        tokenize: true,
    };

    pub fn has(&self, cap: Capability) -> bool {
        match cap {
            Capability::Score => self.score,
            Capability::Generate => self.generate,
            Capability::Logprobs => self.logprobs,
            Capability::Tokenize => self.tokenize,
        }
    }

    pub fn require(&self, caps: &[Capability], who: &str) -> Result<()> {
        for cap in caps {
            if !self.has(*cap) {
                bail!(UnsupportedCapability, "{who} lacks capability {cap:?}");
            }
        }
        Ok(())
    }
}

/// The rendered edit prefix: a preamble followed by "New Fact: ..." lines.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IceContext {
    pub preamble: String,
    pub lines: Vec<String>,
}

impl IceContext {
    /// No edits and no preamble; the prompt is sent bare.
    pub fn empty() -> Self {
        IceContext::default()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Full text placed before the question, including the trailing
    /// "Prompt: " marker. Empty for an empty context.
    pub fn render_prefix(&self) -> String {
        if self.lines.is_empty() {
            return String::new();
        }
        let mut out = String::new();
        out.push_str(&self.preamble);
        out.push('\n');
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(PROMPT_MARKER);
        out
    }

    fn wire_preamble(&self) -> Option<String> {
        (!self.lines.is_empty()).then(|| self.preamble.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizeRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizeResponse {
    pub tokens: Vec<String>,
    pub ids: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelLogitsRequest {
    pub context: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preamble: Option<String>,
    pub prompt: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelLogitsResponse {
    pub logits: Vec<f64>,
    /// Set when the endpoint could not interpret the prompt and returned
    /// uninformative logits.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub context: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preamble: Option<String>,
    pub prompt: String,
    pub max_tokens: usize,
    #[serde(default)]
    pub stop: Vec<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobsRequest {
    pub context: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preamble: Option<String>,
    pub prefix: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobsResponse {
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: String,
}

/// A language model reachable through the four primitive calls.
///
/// Implementations must be deterministic: identical requests give
/// identical responses.
pub trait ModelEndpoint: Send + Sync {
    fn descriptor(&self) -> String;
    fn capabilities(&self) -> Capabilities;
    fn tokenize(&self, req: &TokenizeRequest) -> Result<TokenizeResponse>;
    fn label_logits(&self, req: &LabelLogitsRequest) -> Result<LabelLogitsResponse>;
    fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse>;
    fn logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse>;
}

impl<T: ModelEndpoint + ?Sized> ModelEndpoint for Arc<T> {
    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn tokenize(&self, req: &TokenizeRequest) -> Result<TokenizeResponse> {
        (**self).tokenize(req)
    }
    fn label_logits(&self, req: &LabelLogitsRequest) -> Result<LabelLogitsResponse> {
        (**self).label_logits(req)
    }
    fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse> {
        (**self).generate(req)
    }
    fn logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse> {
        (**self).logprobs(req)
    }
}

impl<T: ModelEndpoint + ?Sized> ModelEndpoint for &T {
    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn tokenize(&self, req: &TokenizeRequest) -> Result<TokenizeResponse> {
        (**self).tokenize(req)
    }
    fn label_logits(&self, req: &LabelLogitsRequest) -> Result<LabelLogitsResponse> {
        (**self).label_logits(req)
    }
    fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse> {
        (**self).generate(req)
    }
    fn logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse> {
        (**self).logprobs(req)
    }
}

/// Softmax scores over a label set, aligned with `labels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub labels: Vec<String>,
    pub scores: Vec<f64>,
    #[serde(default)]
    pub uniform_fallback: bool,
}

impl LabelDistribution {
    pub fn from_logits(labels: &[String], logits: &[f64]) -> Result<Self> {
        if labels.len() != logits.len() {
            bail!(Endpoint, "{} logits for {} labels", logits.len(), labels.len());
        }
        if logits.iter().any(|l| !l.is_finite()) {
            bail!(NonFiniteScore, "non-finite label logit in {logits:?}");
        }
        Ok(LabelDistribution {
            labels: labels.to_vec(),
            scores: softmax(logits),
            uniform_fallback: false,
        })
    }

    pub fn score_of(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.scores[i])
    }

    /// Argmax with ties resolved toward the earlier label.
    pub fn argmax(&self) -> Prediction {
        let mut best = 0;
        for (i, s) in self.scores.iter().enumerate() {
            if *s > self.scores[best] {
                best = i;
            }
        }
        Prediction {
            label: self.labels[best].clone(),
            score: self.scores[best],
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Log-softmax entry for `index`.
pub fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[index] - lse
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateParams {
    pub max_tokens: usize,
    pub stop: Vec<String>,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for GenerateParams {
    fn default() -> Self {
        GenerateParams {
            max_tokens: 128,
            stop: Vec::new(),
            temperature: 0.0,
            seed: 0,
        }
    }
}

pub fn label_logits_request(context: &IceContext, prompt: &str, labels: &[String]) -> LabelLogitsRequest {
    LabelLogitsRequest {
        context: context.lines.clone(),
        preamble: context.wire_preamble(),
        prompt: prompt.to_string(),
        labels: labels.to_vec(),
    }
}

pub fn score_labels(
    endpoint: &dyn ModelEndpoint,
    context: &IceContext,
    prompt: &str,
    labels: &[String],
) -> Result<LabelDistribution> {
    if labels.is_empty() {
        bail!(InvalidInstance, "empty label set");
    }
    endpoint
        .capabilities()
        .require(&[Capability::Score], &endpoint.descriptor())?;
    let resp = endpoint.label_logits(&label_logits_request(context, prompt, labels))?;
    let mut dist = LabelDistribution::from_logits(labels, &resp.logits)?;
    dist.uniform_fallback = resp.fallback;
    Ok(dist)
}

pub fn predict(
    endpoint: &dyn ModelEndpoint,
    context: &IceContext,
    prompt: &str,
    labels: &[String],
) -> Result<Prediction> {
    Ok(score_labels(endpoint, context, prompt, labels)?.argmax())
}

pub fn generate(
    endpoint: &dyn ModelEndpoint,
    context: &IceContext,
    prompt: &str,
    params: &GenerateParams,
) -> Result<String> {
    if params.max_tokens == 0 {
        bail!(Config, "max_tokens must be at least 1");
    }
    endpoint
        .capabilities()
        .require(&[Capability::Generate], &endpoint.descriptor())?;
    let resp = endpoint.generate(&GenerateRequest {
        context: context.lines.clone(),
        preamble: context.wire_preamble(),
        prompt: prompt.to_string(),
        max_tokens: params.max_tokens,
        stop: params.stop.clone(),
        temperature: params.temperature,
        seed: params.seed,
    })?;
    let mut text = resp.text;
    if let Some(cut) = params.stop.iter().filter_map(|s| text.find(s.as_str())).min() {
        text.truncate(cut);
    }
    if text.trim().is_empty() {
        bail!(EmptyGeneration, "endpoint returned an empty continuation");
    }
    Ok(text)
}

pub fn sequence_logprobs(
    endpoint: &dyn ModelEndpoint,
    context: &IceContext,
    prefix: &str,
    target: &str,
) -> Result<Vec<(String, f64)>> {
    if target.is_empty() {
        bail!(EmptyExplanation, "logprob target is empty");
    }
    endpoint
        .capabilities()
        .require(&[Capability::Logprobs], &endpoint.descriptor())?;
    let resp = endpoint.logprobs(&LogprobsRequest {
        context: context.lines.clone(),
        preamble: context.wire_preamble(),
        prefix: prefix.to_string(),
        target: target.to_string(),
    })?;
    if resp.tokens.len() != resp.logprobs.len() {
        bail!(
            TokenAlignment,
            "{} tokens but {} logprobs",
            resp.tokens.len(),
            resp.logprobs.len()
        );
    }
    if resp.tokens.concat() != target {
        bail!(TokenAlignment, "tokens do not concatenate to the target text");
    }
    if let Some(bad) = resp.logprobs.iter().find(|lp| !lp.is_finite() || **lp > 0.0) {
        bail!(Endpoint, "invalid token logprob {bad}");
    }
    Ok(resp.tokens.into_iter().zip(resp.logprobs).collect())
}

/// exp of the mean negative token logprob of `target`.
pub fn perplexity(
    endpoint: &dyn ModelEndpoint,
    context: &IceContext,
    prefix: &str,
    target: &str,
) -> Result<f64> {
    let lps = sequence_logprobs(endpoint, context, prefix, target)?;
    Ok(perplexity_of(lps.iter().map(|(_, lp)| *lp)))
}

pub fn perplexity_of(logprobs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = logprobs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), lp| (s + lp, n + 1));
    (-sum / n.max(1) as f64).exp()
}

pub fn tokenize(endpoint: &dyn ModelEndpoint, text: &str) -> Result<Vec<String>> {
    endpoint
        .capabilities()
        .require(&[Capability::Tokenize], &endpoint.descriptor())?;
    let resp = endpoint.tokenize(&TokenizeRequest { text: text.to_string() })?;
    if resp.tokens.concat() != text {
        return Err(Error::new(
            ErrorCode::TokenAlignment,
            "tokenizer output does not concatenate to its input",
        ));
    }
    Ok(resp.tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn labels(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn softmax_symmetric_and_hand_value() {
        let d = LabelDistribution::from_logits(&labels(&["yes", "no"]), &[0.0, 0.0]).unwrap();
        assert_eq!(d.scores, vec![0.5, 0.5]);
        let d = LabelDistribution::from_logits(&labels(&["yes", "no"]), &[4.0, -4.0]).unwrap();
        let e4 = 4f64.exp();
        let em4 = (-4f64).exp();
        assert_abs_diff_eq!(d.scores[0], e4 / (e4 + em4), epsilon = 1e-12);
        assert_abs_diff_eq!(d.scores[0], 0.99966, epsilon = 1e-5);
    }

    #[test]
    fn argmax_prefers_earlier_on_tie() {
        let d = LabelDistribution {
            labels: labels(&["A", "B"]),
            scores: vec![0.5, 0.5],
            uniform_fallback: false,
        };
        assert_eq!(d.argmax(), Prediction { label: "A".into(), score: 0.5 });
        let d = LabelDistribution {
            labels: labels(&["A", "B"]),
            scores: vec![0.1, 0.9],
            uniform_fallback: false,
        };
        assert_eq!(d.argmax().label, "B");
    }

    #[test]
    fn perplexity_definition() {
        assert_abs_diff_eq!(perplexity_of([-std::f64::consts::LN_2; 5]), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(perplexity_of([-1.0]), std::f64::consts::E, epsilon = 1e-12);
    }

    #[test]
    fn log_softmax_matches_softmax() {
        let logits = [1.5, -0.3];
        assert_abs_diff_eq!(log_softmax_at(&logits, 1).exp(), softmax(&logits)[1], epsilon = 1e-12);
    }

    #[test]
    fn ice_prefix_layout() {
        let ctx = IceContext {
            preamble: DEFAULT_ICE_PREAMBLE.into(),
            lines: vec!["New Fact: a b c.".into(), "New Fact: d e f.".into()],
        };
        assert_eq!(
            ctx.render_prefix(),
            format!("{DEFAULT_ICE_PREAMBLE}\nNew Fact: a b c.\nNew Fact: d e f.\nPrompt: ")
        );
        assert_eq!(IceContext::empty().render_prefix(), "");
    }
}
