use serde::{Deserialize, Serialize};

use super::shapley::{shapley, Coalition, ShapleyConfig};
use super::{Scorer, FLAG_UNIFORM_FALLBACK};
use crate::domain::{MetricKind, MetricResult, Scoring, Target, TaskInstance};
use crate::error::{bail, Result};
use crate::model;

pub const FLAG_ZERO_CONTRIBUTION: &str = "zero_contribution";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CcShapMode {
    Posthoc,
    Cot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    #[default]
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CcShapConfig {
    pub shapley: ShapleyConfig,
    pub aggregation: Aggregation,
    pub similarity: Similarity,
}

/// Metric result plus the raw contribution vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcShapOutcome {
    pub result: MetricResult,
    pub players: Vec<String>,
    pub phi_pred: Vec<f64>,
    pub phi_expl: Vec<f64>,
}

fn l1_normalize(v: &[f64]) -> Option<Vec<f64>> {
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    (norm > 0.0 && norm.is_finite()).then(|| v.iter().map(|x| x / norm).collect())
}

/// Cosine similarity of the L1-normalized vectors, or `None` when either
/// vector is zero.
pub fn contribution_similarity(pred: &[f64], expl: &[f64]) -> Option<f64> {
    let a = l1_normalize(pred)?;
    let b = l1_normalize(expl)?;
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn mask(tokens: &[String], keep: Coalition, mask_text: &str) -> String {
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if keep.contains(i) {
                t.clone()
            } else {
                let body = t.trim_start();
                if body.is_empty() {
                    t.clone()
                } else {
                    format!("{}{mask_text}", &t[..t.len() - body.len()])
                }
            }
        })
        .collect()
}

/// Compares how question tokens contribute to the predicted label with how
/// they contribute to the explanation tokens. The edit context is never
/// masked.
pub fn ccshap(
    scorer: Scorer<'_>,
    instance: &TaskInstance,
    target: Target,
    mode: CcShapMode,
    config: &CcShapConfig,
) -> Result<CcShapOutcome> {
    let expl = instance.explanation(target);
    if expl.trim().is_empty() {
        bail!(EmptyExplanation, "instance {} has an empty explanation", instance.id);
    }
    let prompts = scorer.prompts;
    let tokens = model::tokenize(scorer.model, &instance.question)?;
    if tokens.concat() != instance.question {
        bail!(TokenAlignment, "question tokens do not concatenate to the question");
    }
    let pred_prompt = |q: &str| match mode {
        CcShapMode::Posthoc => prompts.answer_prompt(q),
        CcShapMode::Cot => prompts.cot_prompt(q, expl),
    };
    let full = model::score_labels(scorer.model, scorer.context, &pred_prompt(&instance.question), &instance.labels)?;
    let predicted = full.argmax();
    let label_idx = instance
        .labels
        .iter()
        .position(|l| *l == predicted.label)
        .expect("argmax label comes from the label set");
    let fallback = full.uniform_fallback;

    let mask_text = config.shapley.mask_text.as_str();
    let phi_pred = shapley(tokens.len(), &config.shapley, |c| {
        let q = mask(&tokens, c, mask_text);
        let dist = model::score_labels(scorer.model, scorer.context, &pred_prompt(&q), &instance.labels)?;
        Ok(dist.scores[label_idx].max(f64::MIN_POSITIVE).ln())
    })?;
    let phi_expl = shapley(tokens.len(), &config.shapley, |c| {
        let q = mask(&tokens, c, mask_text);
        let prefix = match mode {
            CcShapMode::Posthoc => prompts.posthoc_explanation_prefix(&q, &predicted.label),
            CcShapMode::Cot => prompts.cot_prefix(&q),
        };
        let lps = model::sequence_logprobs(scorer.model, scorer.context, &prefix, expl)?;
        Ok(lps.iter().map(|(_, lp)| lp).sum::<f64>() / lps.len() as f64)
    })?;

    let mut flags = Vec::new();
    let score = match contribution_similarity(&phi_pred, &phi_expl) {
        Some(s) => s,
        None => {
            flags.push(FLAG_ZERO_CONTRIBUTION.to_string());
            0.0
        }
    };
    if fallback {
        flags.push(FLAG_UNIFORM_FALLBACK.to_string());
    }
    Ok(CcShapOutcome {
        result: MetricResult {
            instance_id: instance.id.clone(),
            metric: match mode {
                CcShapMode::Posthoc => MetricKind::CcshapPosthoc,
                CcShapMode::Cot => MetricKind::CcshapCot,
            },
            scoring: Scoring::Continuous,
            target,
            score,
            corrupted_text: None,
            z_before: None,
            z_after: None,
            variant: Some(format!("{:?}", config.shapley.estimator).to_lowercase()),
            flags,
        },
        players: tokens,
        phi_pred,
        phi_expl,
    })
}
