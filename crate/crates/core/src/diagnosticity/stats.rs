//! Bootstrap intervals, one-sample t-test, Wilcoxon signed-rank.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{bail, Result};

pub const EXACT_WILCOXON_MAX_N: usize = 25;

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap interval of the mean. Resample `b` draws from
/// ChaCha stream `b` of `seed`.
pub fn bootstrap_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() {
        bail!(NoData, "bootstrap needs at least one value");
    }
    if !(level > 0.0 && level < 1.0) {
        bail!(Config, "confidence level {level} outside (0, 1)");
    }
    if resamples == 0 {
        bail!(Config, "bootstrap needs at least one resample");
    }
    if values.iter().all(|v| *v == values[0]) {
        return Ok((values[0], values[0]));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(&means, alpha), quantile(&means, 1.0 - alpha)))
}

/// One-sided p-value for the mean of `values` exceeding `mu`.
pub fn t_test_gt(values: &[f64], mu: f64) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        bail!(NoData, "t-test needs at least two values, got {n}");
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        bail!(DegenerateSample, "sample variance is zero");
    }
    let t = (m - mu) / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df >= 1");
    Ok(dist.sf(t))
}

/// Average ranks (1-based) of `values`, ties sharing the mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank p-value for paired samples. Zero
/// differences are dropped. Exact null distribution up to
/// [`EXACT_WILCOXON_MAX_N`] pairs, normal approximation with tie and
/// continuity correction above.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        bail!(ShapeMismatch, "paired samples differ in length: {} vs {}", x.len(), y.len());
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        bail!(DegenerateSample, "all paired differences are zero");
    }
    if d.iter().any(|v| !v.is_finite()) {
        bail!(NonFiniteScore, "non-finite paired difference");
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let n = d.len();
    if n <= EXACT_WILCOXON_MAX_N {
        Ok(exact_p(&d, &ranks))
    } else {
        Ok(normal_p(&d, &ranks, &abs))
    }
}

fn exact_p(d: &[f64], ranks: &[f64]) -> f64 {
    // Doubled ranks are integers even with averaged ties.
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w: usize = d.iter().zip(&doubled).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let all = 2f64.powi(d.len() as i32);
    let lower: f64 = counts[..=w].iter().sum::<f64>() / all;
    let upper: f64 = counts[w..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p(d: &[f64], ranks: &[f64], abs: &[f64]) -> f64 {
    let n = d.len() as f64;
    let w: f64 = d.iter().zip(ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tie_term: f64 = sorted
        .chunk_by(|a, b| a == b)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let dev = ((w - mean).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z)).min(1.0)
}
