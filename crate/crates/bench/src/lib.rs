//! Shared inputs for the benchmarks.

use faithdiag_core::datagen::{bundled_world_facts, gen_factcheck};
use faithdiag_core::domain::TaskInstance;
use faithdiag_core::{bundled, MockConfig, MockModel};

/// Weighted voting game: a coalition's value is the squared sum of its
/// members' weights.
pub fn quadratic_game(n: usize) -> impl FnMut(faithdiag_core::metrics::Coalition) -> faithdiag_core::Result<f64> {
    let weights: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / n as f64).collect();
    move |c| {
        let s: f64 = weights.iter().enumerate().filter(|(i, _)| c.contains(*i)).map(|(_, w)| w).sum();
        Ok(s * s)
    }
}

pub fn mock_with_world(config: MockConfig) -> MockModel {
    MockModel::new(config).with_facts(&bundled_world_facts())
}

pub fn factcheck_instances(n: usize) -> Vec<TaskInstance> {
    gen_factcheck(&bundled::factcheck_triplets(), &bundled::siblings(), n, 0).expect("bundled data generates")
}
