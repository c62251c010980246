//! Shapley values by exhaustive enumeration or permutation sampling.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// A subset of players as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Coalition(pub u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn full(n: usize) -> Self {
        Coalition(if n >= 64 { u64::MAX } else { (1u64 << n) - 1 })
    }

    pub fn contains(self, player: usize) -> bool {
        self.0 >> player & 1 == 1
    }

    pub fn with(self, player: usize) -> Self {
        Coalition(self.0 | 1 << player)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Exact,
    PermutationSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapleyConfig {
    pub estimator: Estimator,
    pub samples: usize,
    pub seed: u64,
    pub mask_text: String,
    pub max_exact_players: usize,
}

impl Default for ShapleyConfig {
    fn default() -> Self {
        ShapleyConfig {
            estimator: Estimator::Exact,
            samples: 200,
            seed: 0,
            mask_text: "_".into(),
            max_exact_players: 12,
        }
    }
}

impl ShapleyConfig {
    pub fn sampling(samples: usize, seed: u64) -> Self {
        ShapleyConfig {
            estimator: Estimator::PermutationSampling,
            samples,
            seed,
            ..ShapleyConfig::default()
        }
    }
}

const MAX_SAMPLED_PLAYERS: usize = 64;

/// Shapley value of each of `n` players under `value`. Each distinct
/// coalition is evaluated at most once.
pub fn shapley<F>(n: usize, config: &ShapleyConfig, value: F) -> Result<Vec<f64>>
where
    F: FnMut(Coalition) -> Result<f64>,
{
    if n == 0 {
        bail!(NoData, "a game needs at least one player");
    }
    match config.estimator {
        Estimator::Exact => exact(n, config.max_exact_players, value),
        Estimator::PermutationSampling => sampled(n, config.samples, config.seed, value),
    }
}

fn exact<F>(n: usize, max_players: usize, mut value: F) -> Result<Vec<f64>>
where
    F: FnMut(Coalition) -> Result<f64>,
{
    if n > max_players.min(MAX_SAMPLED_PLAYERS - 1) {
        bail!(
            TooManyPlayers,
            "{n} players exceeds the exact limit of {max_players}"
        );
    }
    let values = (0..1u64 << n)
        .map(|m| value(Coalition(m)))
        .collect::<Result<Vec<_>>>()?;
    // weight[s] = s! (n - s - 1)! / n!
    let mut weight = vec![1.0 / n as f64; n];
    for s in 1..n {
        weight[s] = weight[s - 1] * s as f64 / (n - s) as f64;
    }
    let mut phi = vec![0.0; n];
    for (mask, v) in values.iter().enumerate() {
        let c = Coalition(mask as u64);
        let w = weight.get(c.len()).copied().unwrap_or(0.0);
        for (i, p) in phi.iter_mut().enumerate() {
            if !c.contains(i) {
                *p += w * (values[c.with(i).0 as usize] - v);
            }
        }
    }
    Ok(phi)
}

fn sampled<F>(n: usize, samples: usize, seed: u64, mut value: F) -> Result<Vec<f64>>
where
    F: FnMut(Coalition) -> Result<f64>,
{
    if samples == 0 {
        bail!(Config, "permutation sampling needs at least one sample");
    }
    if n > MAX_SAMPLED_PLAYERS {
        bail!(TooManyPlayers, "{n} players exceeds {MAX_SAMPLED_PLAYERS}");
    }
    let mut memo: HashMap<Coalition, f64> = HashMap::new();
    let mut eval = |c: Coalition| -> Result<f64> {
        if let Some(v) = memo.get(&c) {
            return Ok(*v);
        }
        let v = value(c)?;
        memo.insert(c, v);
        Ok(v)
    };
    let mut phi = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut c = Coalition::EMPTY;
        let mut prev = eval(c)?;
        for &i in &order {
            c = c.with(i);
            let v = eval(c)?;
            phi[i] += v - prev;
            prev = v;
        }
    }
    phi.iter_mut().for_each(|p| *p /= samples as f64);
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn game(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..1u64 << n).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()
    }

    #[test]
    fn two_player_example() {
        let v = [0.0, 1.0, 2.0, 4.0];
        let phi = shapley(2, &ShapleyConfig::default(), |c| Ok(v[c.0 as usize])).unwrap();
        assert_abs_diff_eq!(phi[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(phi[1], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn additive_and_symmetric_games() {
        let w = [0.3, -1.2, 2.0, 0.7];
        let phi = shapley(4, &ShapleyConfig::default(), |c| {
            Ok((0..4).filter(|&i| c.contains(i)).map(|i| w[i]).sum())
        })
        .unwrap();
        for (p, w) in phi.iter().zip(w) {
            assert_abs_diff_eq!(*p, w, epsilon = 1e-12);
        }
        let phi = shapley(5, &ShapleyConfig::default(), |c| Ok(c.len() as f64)).unwrap();
        assert!(phi.iter().all(|p| (p - 1.0).abs() < 1e-12));
    }

    #[test]
    fn exact_limit() {
        let err = shapley(13, &ShapleyConfig::default(), |_| Ok(0.0)).unwrap_err();
        assert_eq!(err.code(), crate::ErrorCode::TooManyPlayers);
    }

    #[test]
    fn sampling_is_deterministic_and_memoized() {
        let v = game(6, 3);
        let cfg = ShapleyConfig::sampling(50, 9);
        let mut calls = 0;
        let a = shapley(6, &cfg, |c| {
            calls += 1;
            Ok(v[c.0 as usize])
        })
        .unwrap();
        assert!(calls <= 64);
        let b = shapley(6, &cfg, |c| Ok(v[c.0 as usize])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn value_errors_propagate() {
        let err = shapley(3, &ShapleyConfig::default(), |c| {
            if c.len() == 2 {
                Err(crate::Error::new(crate::ErrorCode::Transport, "down"))
            } else {
                Ok(0.0)
            }
        })
        .unwrap_err();
        assert_eq!(err.code(), crate::ErrorCode::Transport);
    }

    proptest! {
        #[test]
        fn exact_efficiency(n in 1usize..=8, seed in any::<u64>()) {
            let v = game(n, seed);
            let phi = shapley(n, &ShapleyConfig::default(), |c| Ok(v[c.0 as usize])).unwrap();
            let total: f64 = phi.iter().sum();
            prop_assert!((total - (v[(1usize << n) - 1] - v[0])).abs() < 1e-9);
        }

        #[test]
        fn sampled_efficiency(n in 1usize..=8, seed in any::<u64>(), samples in 1usize..20) {
            let v = game(n, seed);
            let phi = shapley(n, &ShapleyConfig::sampling(samples, seed), |c| Ok(v[c.0 as usize])).unwrap();
            let total: f64 = phi.iter().sum();
            prop_assert!((total - (v[(1usize << n) - 1] - v[0])).abs() < 1e-9);
        }
    }
}
