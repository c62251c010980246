//! Acceptance checks, one line per criterion. Runs without the test
//! harness so the lines are always printed.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::{all_pass, check_analogy, check_objectcount};
use faithdiag_core::corruption::{fill_tokens, truncate_heuristic, truncate_one_third, CorruptionKind, CorruptionSpec, FillerKind};
use faithdiag_core::datagen::{bundled_world_facts, gen_analogy, gen_factcheck, gen_objectcount};
use faithdiag_core::diagnosticity::{bootstrap_ci, copeland, diagnosticity, t_test_gt, wilcoxon_signed_rank, DiagnosticityConfig};
use faithdiag_core::domain::{KnowledgeTriplet, Scoring, Target, TaskInstance};
use faithdiag_core::editing::{build_edit_statements, render_ice_context};
use faithdiag_core::metrics::{continuous_cot_score, evaluate, metric_random, shapley, Coalition, Endpoints, MetricSpec, Scorer, ShapleyConfig};
use faithdiag_core::prompts::PromptSet;
use faithdiag_core::reliability::{edit_reliability, ReliabilityConfig};
use faithdiag_core::{bundled, MockConfig, MockModel, TaskKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

type Outcome = Result<String, String>;
type Game = Box<dyn Fn(Coalition) -> f64>;
type Criterion = (&'static str, fn() -> Outcome);

fn factcheck(n: usize, seed: u64) -> Vec<TaskInstance> {
    gen_factcheck(&bundled::factcheck_triplets(), &bundled::siblings(), n, seed).unwrap()
}

fn mock(config: MockConfig) -> MockModel {
    MockModel::new(config).with_facts(&bundled_world_facts())
}

fn quick_diag() -> DiagnosticityConfig {
    DiagnosticityConfig {
        resamples: 200,
        ..Default::default()
    }
}

fn copeland_reproduction() -> Outcome {
    let r = bundled::reference_diagnosticity();
    let got = copeland(&r.table, &r.categories).map_err(|e| e.to_string())?;
    let want = BTreeMap::from([
        ("ccshap_posthoc", 5.0),
        ("simulatability", 3.0),
        ("early_answering", 18.0),
        ("filler_tokens", 29.0),
        ("adding_mistakes", 13.0),
        ("paraphrasing", 8.0),
        ("ccshap_cot", 12.0),
    ]);
    let got_ref: BTreeMap<&str, f64> = got.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    if got_ref == want {
        Ok(format!("{got_ref:?}"))
    } else {
        Err(format!("got {got_ref:?}"))
    }
}

fn worked_example() -> Outcome {
    let a = continuous_cot_score(CorruptionKind::EarlyAnswering, 0.96, 0.05);
    let b = continuous_cot_score(CorruptionKind::AddingMistakes, 0.99, 0.42);
    if (a - 0.91).abs() <= 0.005 && (b - 0.57).abs() <= 0.005 {
        Ok(format!("{a:.3}, {b:.3}"))
    } else {
        Err(format!("{a}, {b}"))
    }
}

fn null_calibration() -> Outcome {
    let pairs: Vec<(f64, f64)> = factcheck(10_000, 3)
        .iter()
        .map(|i| {
            (
                metric_random(&i.id, Target::Faithful, 17).score,
                metric_random(&i.id, Target::Unfaithful, 17).score,
            )
        })
        .collect();
    let r = diagnosticity("random", Scoring::Continuous, &pairs, &quick_diag()).map_err(|e| e.to_string())?;
    if (0.48..=0.52).contains(&r.d) {
        Ok(format!("D = {:.4} over {} pairs", r.d, r.n_pairs))
    } else {
        Err(format!("D = {}", r.d))
    }
}

fn cot_diagnosticity(model: &MockModel, instances: &[TaskInstance], scoring: Scoring) -> Result<f64, String> {
    let spec = MetricSpec::Cot {
        corruption: CorruptionSpec::filler(FillerKind::Dots, false),
        scoring,
    };
    let prompts = PromptSet::default();
    let pairs = instances
        .par_iter()
        .map(|inst| {
            let ctx = render_ice_context(&inst.edits_bar)?;
            let eps = Endpoints {
                scorer: Scorer::new(model, &ctx, &prompts),
                simulator: None,
                helper: None,
            };
            let f = evaluate(&spec, eps, inst, Target::Faithful, 0)?.score;
            let u = evaluate(&spec, eps, inst, Target::Unfaithful, 0)?.score;
            Ok((f, u))
        })
        .collect::<faithdiag_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    diagnosticity(&spec.label(), scoring, &pairs, &quick_diag())
        .map(|r| r.d)
        .map_err(|e| e.to_string())
}

fn mock_end_to_end() -> Outcome {
    let instances = factcheck(200, 0);
    let clean = cot_diagnosticity(&mock(MockConfig::default()), &instances, Scoring::Continuous)?;
    let noisy = mock(MockConfig {
        noise_sigma: 2.0,
        ..MockConfig::default()
    });
    let cont = cot_diagnosticity(&noisy, &instances, Scoring::Continuous)?;
    let bin = cot_diagnosticity(&noisy, &instances, Scoring::Binary)?;
    let detail = format!("noise-free D = {clean}; sigma 2: continuous {cont:.3} vs binary {bin:.3}");
    if clean == 1.0 && cont > bin {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_game(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn shapley_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_efficiency: f64 = 0.0;
    for g in 0..100 {
        let n = 1 + g % 10;
        let table = random_game(n, &mut rng);
        let phi = shapley(n, &ShapleyConfig::default(), |c: Coalition| Ok(table[c.0 as usize])).map_err(|e| e.to_string())?;
        let gap = (phi.iter().sum::<f64>() - (table[(1 << n) - 1] - table[0])).abs();
        worst_efficiency = worst_efficiency.max(gap);
    }
    let weights = [0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.6, 0.4];
    let fixtures: Vec<Game> = vec![
        Box::new(move |c| weights.iter().enumerate().filter(|(i, _)| c.contains(*i)).map(|(_, w)| w).sum::<f64>().powi(2) / 4.0),
        Box::new(|c| if c.len() >= 5 { 1.0 } else { 0.0 }),
        Box::new(|c| {
            let left = (0..4).filter(|&i| c.contains(i)).count();
            let right = (4..8).filter(|&i| c.contains(i)).count();
            left.min(right) as f64 / 4.0
        }),
    ];
    let mut worst_sampled: f64 = 0.0;
    for (k, f) in fixtures.iter().enumerate() {
        let exact = shapley(8, &ShapleyConfig::default(), |c| Ok(f(c))).map_err(|e| e.to_string())?;
        let sampled = shapley(8, &ShapleyConfig::sampling(2000, 100 + k as u64), |c| Ok(f(c))).map_err(|e| e.to_string())?;
        for (a, b) in exact.iter().zip(&sampled) {
            worst_sampled = worst_sampled.max((a - b).abs());
        }
    }
    let detail = format!("max efficiency gap {worst_efficiency:.1e}, max sampled error {worst_sampled:.4}");
    if worst_efficiency <= 1e-9 && worst_sampled <= 0.02 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[derive(Deserialize)]
struct TCase {
    x: Vec<f64>,
    mu: f64,
    p: f64,
}

fn statistics_oracles() -> Outcome {
    let w = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0.0; 6]).map_err(|e| e.to_string())?;
    let cases: Vec<TCase> = serde_json::from_str(include_str!("fixtures/ttest.json")).unwrap();
    let worst_t = cases
        .iter()
        .map(|c| t_test_gt(&c.x, c.mu).map(|p| (p - c.p).abs()))
        .collect::<faithdiag_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?
        .into_iter()
        .fold(0.0f64, f64::max);
    let v: Vec<f64> = (0..60).map(|i| f64::from(i % 3) / 2.0).collect();
    let boot_a = bootstrap_ci(&v, 1000, 0.95, 8).map_err(|e| e.to_string())?;
    let boot_b = bootstrap_ci(&v, 1000, 0.95, 8).map_err(|e| e.to_string())?;
    let detail = format!("wilcoxon p = {w}, worst t-test error {worst_t:.1e} over {} fixtures, bootstrap {boot_a:?}", cases.len());
    if w == 0.03125 && worst_t < 1e-6 && cases.len() == 10 && boot_a == boot_b {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[derive(Deserialize)]
struct TruncCase {
    text: String,
    expected: String,
}

fn corruption_fixtures() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let alphabet: Vec<char> = "abcXYZ .,;!?é¶ü漢".chars().collect();
    let mut law_failures = 0;
    for _ in 0..1000 {
        let len = rng.random_range(0..80);
        let s: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        let kind = FillerKind::ALL[rng.random_range(0..5)];
        let ok = fill_tokens(&s, kind, true).chars().count() == 3 * s.chars().count()
            && fill_tokens(&s, kind, false) == kind.unit()
            && s.starts_with(&truncate_one_third(&s))
            && truncate_one_third(&s).chars().count() == s.chars().count() / 3;
        law_failures += usize::from(!ok);
    }
    let cases: Vec<TruncCase> = serde_json::from_str(include_str!("fixtures/truncation.json")).unwrap();
    let agree = cases.iter().filter(|c| truncate_heuristic(&c.text) == c.expected).count();
    let detail = format!("length laws failed on {law_failures}/1000, heuristic agreement {agree}/{}", cases.len());
    if law_failures == 0 && agree == cases.len() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn generator_soundness() -> Outcome {
    let catalog = bundled::category_catalog();
    let geo = bundled::geo_catalog();
    let oc = gen_objectcount(&catalog, 1000, 8).map_err(|e| e.to_string())?;
    let an = gen_analogy(&geo, 1000, 8).map_err(|e| e.to_string())?;
    all_pass(&oc, |i| check_objectcount(i, &catalog))?;
    all_pass(&an, |i| check_analogy(i, &geo))?;
    let edits = [
        build_edit_statements(TaskKind::Factcheck, &[KnowledgeTriplet::new("Rihanna", "is", "a researcher")]),
        build_edit_statements(
            TaskKind::Analogy,
            &[
                KnowledgeTriplet::new("United Kingdom", "capitalOf", "Birmingham"),
                KnowledgeTriplet::new("London", "cityOf", "United Kingdom"),
            ],
        ),
        build_edit_statements(
            TaskKind::Objectcount,
            &[KnowledgeTriplet::new("Aspendos Theater", "is located in", "Spain")],
        ),
    ]
    .into_iter()
    .collect::<faithdiag_core::Result<Vec<_>>>()
    .map_err(|e| e.to_string())?
    .concat();
    let prefix = render_ice_context(&edits).map_err(|e| e.to_string())?.render_prefix();
    if prefix != include_str!("fixtures/ice_prefix_golden.txt") {
        return Err("ICE prefix differs from golden fixture".into());
    }
    Ok(format!("{} object counting and {} analogy instances sound; ICE prefix matches", oc.len(), an.len()))
}

fn edit_reliability_on_mock() -> Outcome {
    let prompts = PromptSet::default();
    let instances = factcheck(10_000, 4);
    let cfg = ReliabilityConfig {
        resamples: 200,
        ..Default::default()
    };
    let edited = edit_reliability(&mock(MockConfig::default()), &prompts, &instances, &cfg).map_err(|e| e.to_string())?;
    let noisy = mock(MockConfig {
        noise_sigma: 0.5,
        ..MockConfig::default()
    });
    let withheld = ReliabilityConfig {
        apply_edits: false,
        ..cfg
    };
    let bare = edit_reliability(&noisy, &prompts, &instances, &withheld).map_err(|e| e.to_string())?;
    let detail = format!("with edits {:.4}, withheld {:.4} over {} instances", edited.fraction, bare.fraction, bare.n);
    if edited.fraction == 1.0 && (0.45..=0.55).contains(&bare.fraction) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("Copeland reproduction", copeland_reproduction),
        ("worked-example replay", worked_example),
        ("null-metric calibration", null_calibration),
        ("mock end-to-end diagnosticity", mock_end_to_end),
        ("Shapley correctness", shapley_correctness),
        ("statistics oracles", statistics_oracles),
        ("corruption fixtures", corruption_fixtures),
        ("generator soundness", generator_soundness),
        ("edit reliability on mock", edit_reliability_on_mock),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
