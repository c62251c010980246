//! Whether an edited model actually holds its edits: faithful explanations
//! should read as more likely (lower perplexity) than unfaithful ones.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnosticity::bootstrap_ci;
use crate::domain::TaskInstance;
use crate::editing::render_ice_context_with;
use crate::error::{bail, Result};
use crate::model::{perplexity, IceContext, ModelEndpoint};
use crate::prompts::PromptSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReliabilityConfig {
    /// Condition on the `edits_bar` context; off measures the unedited model.
    pub apply_edits: bool,
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for ReliabilityConfig {
    fn default() -> Self {
        ReliabilityConfig {
            apply_edits: true,
            resamples: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReliability {
    pub instance_id: String,
    pub ppl_faithful: f64,
    pub ppl_unfaithful: f64,
    pub win: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedInstance {
    pub instance_id: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub task: String,
    pub model: String,
    pub n: usize,
    pub fraction: f64,
    pub ci95: (f64, f64),
    pub per_instance: Vec<InstanceReliability>,
    pub failed: Vec<FailedInstance>,
}

pub fn win(ppl_faithful: f64, ppl_unfaithful: f64) -> f64 {
    if ppl_faithful < ppl_unfaithful {
        1.0
    } else if ppl_faithful == ppl_unfaithful {
        0.5
    } else {
        0.0
    }
}

fn measure(
    endpoint: &dyn ModelEndpoint,
    prompts: &PromptSet,
    instance: &TaskInstance,
    cfg: &ReliabilityConfig,
) -> Result<InstanceReliability> {
    let context = if cfg.apply_edits {
        render_ice_context_with(&instance.edits_bar, &prompts.ice_preamble)?
    } else {
        IceContext::empty()
    };
    let prefix = prompts.cot_prefix(&instance.question);
    let ppl_faithful = perplexity(endpoint, &context, &prefix, &instance.expl_faithful)?;
    let ppl_unfaithful = perplexity(endpoint, &context, &prefix, &instance.expl_unfaithful)?;
    Ok(InstanceReliability {
        instance_id: instance.id.clone(),
        ppl_faithful,
        ppl_unfaithful,
        win: win(ppl_faithful, ppl_unfaithful),
    })
}

/// Fraction of instances whose faithful explanation has the lower
/// perplexity. Endpoint failures are listed in `failed` and excluded.
pub fn edit_reliability(
    endpoint: &dyn ModelEndpoint,
    prompts: &PromptSet,
    instances: &[TaskInstance],
    cfg: &ReliabilityConfig,
) -> Result<ReliabilityReport> {
    if instances.is_empty() {
        bail!(NoData, "no instances to measure");
    }
    let outcomes: Vec<_> = instances
        .par_iter()
        .map(|inst| (inst, measure(endpoint, prompts, inst, cfg)))
        .collect();
    let mut per_instance = Vec::new();
    let mut failed = Vec::new();
    for (inst, outcome) in outcomes {
        match outcome {
            Ok(r) => per_instance.push(r),
            Err(e) if e.code().is_endpoint_failure() => {
                log::warn!("reliability: instance {} failed: {e}", inst.id);
                failed.push(FailedInstance {
                    instance_id: inst.id.clone(),
                    code: e.code().to_string(),
                    message: e.message().to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    if per_instance.is_empty() {
        bail!(NoData, "all {} instances failed", instances.len());
    }
    let wins: Vec<f64> = per_instance.iter().map(|r| r.win).collect();
    let fraction = wins.iter().sum::<f64>() / wins.len() as f64;
    let (lo, hi) = bootstrap_ci(&wins, cfg.resamples, cfg.level, cfg.seed)?;
    let mut tasks: Vec<&str> = instances.iter().map(|i| i.task.as_str()).collect();
    tasks.sort_unstable();
    tasks.dedup();
    Ok(ReliabilityReport {
        task: tasks.join("+"),
        model: endpoint.descriptor(),
        n: per_instance.len(),
        fraction,
        ci95: (lo.min(fraction), hi.max(fraction)),
        per_instance,
        failed,
    })
}

/// One row per report: task, model, n, fraction and its interval.
pub fn reliability_csv(reports: &[ReliabilityReport]) -> String {
    let mut out = String::from("task,model,n,failed,fraction,ci_lo,ci_hi\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            r.task,
            r.model.replace(',', ";"),
            r.n,
            r.failed.len(),
            r.fraction,
            r.ci95.0,
            r.ci95.1
        );
    }
    out
}
