//! Pairwise verdicts and their aggregation into diagnosticity, with the
//! statistics used to report it.

mod copeland;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use copeland::copeland;
pub use stats::{bootstrap_ci, t_test_gt, wilcoxon_signed_rank};

use crate::domain::Scoring;
use crate::error::{bail, ErrorCode, Result};

pub const FLAG_DEGENERATE: &str = "degenerate_sample";

/// 1 if the faithful explanation scores higher, 0.5 on a tie within
/// `epsilon`, 0 otherwise.
pub fn pair_verdict(f_faithful: f64, f_unfaithful: f64, epsilon: f64) -> Result<f64> {
    if !f_faithful.is_finite() || !f_unfaithful.is_finite() {
        bail!(NonFiniteScore, "non-finite score pair ({f_faithful}, {f_unfaithful})");
    }
    Ok(if (f_faithful - f_unfaithful).abs() <= epsilon {
        0.5
    } else if f_faithful > f_unfaithful {
        1.0
    } else {
        0.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticityConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
    pub epsilon: f64,
}

impl Default for DiagnosticityConfig {
    fn default() -> Self {
        DiagnosticityConfig {
            resamples: 1000,
            level: 0.95,
            seed: 0,
            epsilon: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticityReport {
    pub metric: String,
    pub scoring: Scoring,
    pub n_pairs: usize,
    pub verdicts: Vec<f64>,
    #[serde(rename = "D")]
    pub d: f64,
    pub ci95: (f64, f64),
    pub p_gt_half: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Aggregates (faithful, unfaithful) score pairs.
pub fn diagnosticity(
    metric: &str,
    scoring: Scoring,
    pairs: &[(f64, f64)],
    config: &DiagnosticityConfig,
) -> Result<DiagnosticityReport> {
    if pairs.is_empty() {
        bail!(NoPairs, "no score pairs for metric '{metric}'");
    }
    let verdicts = pairs
        .iter()
        .map(|&(f, u)| pair_verdict(f, u, config.epsilon))
        .collect::<Result<Vec<_>>>()?;
    let d = verdicts.iter().sum::<f64>() / verdicts.len() as f64;
    let (lo, hi) = bootstrap_ci(&verdicts, config.resamples, config.level, config.seed)?;
    let mut flags = Vec::new();
    let p_gt_half = match t_test_gt(&verdicts, 0.5) {
        Ok(p) => p,
        Err(e) if matches!(e.code(), ErrorCode::DegenerateSample | ErrorCode::NoData) => {
            flags.push(FLAG_DEGENERATE.to_string());
            if d > 0.5 {
                0.0
            } else if d < 0.5 {
                1.0
            } else {
                0.5
            }
        }
        Err(e) => return Err(e),
    };
    Ok(DiagnosticityReport {
        metric: metric.to_string(),
        scoring,
        n_pairs: verdicts.len(),
        verdicts,
        d,
        ci95: (lo.min(d), hi.max(d)),
        p_gt_half,
        epsilon: config.epsilon,
        flags,
    })
}
