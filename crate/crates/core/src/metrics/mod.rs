//! Per-instance faithfulness metrics.
//!
//! All metrics score one explanation of one instance against one model
//! context. Diagnosticity compares the faithful and unfaithful scores.

mod ccshap;
pub mod shapley;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ccshap::{ccshap, contribution_similarity, CcShapConfig, CcShapMode, CcShapOutcome};
pub use shapley::{shapley, Coalition, Estimator, ShapleyConfig};

use crate::corruption::{CorruptionKind, CorruptionSpec};
use crate::domain::{MetricKind, MetricResult, Scoring, Target, TaskInstance};
use crate::error::{bail, Result};
use crate::model::{self, IceContext, ModelEndpoint, Prediction};
use crate::prompts::PromptSet;

pub const FLAG_UNIFORM_FALLBACK: &str = "uniform_fallback";

/// The model under evaluation: an endpoint plus the edit context that turns
/// it into the edited model.
#[derive(Clone, Copy)]
pub struct Scorer<'a> {
    pub model: &'a dyn ModelEndpoint,
    pub context: &'a IceContext,
    pub prompts: &'a PromptSet,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a dyn ModelEndpoint, context: &'a IceContext, prompts: &'a PromptSet) -> Self {
        Scorer { model, context, prompts }
    }
}

pub fn metric_kind(kind: CorruptionKind) -> MetricKind {
    match kind {
        CorruptionKind::EarlyAnswering | CorruptionKind::EarlyAnsweringHeuristic => MetricKind::EarlyAnswering,
        CorruptionKind::Filler => MetricKind::FillerTokens,
        CorruptionKind::AddingMistakes => MetricKind::AddingMistakes,
        CorruptionKind::Paraphrasing => MetricKind::Paraphrasing,
    }
}

/// Top label and its probability for the CoT prompt carrying `expl`.
pub fn cot_prediction_score(
    scorer: Scorer<'_>,
    question: &str,
    labels: &[String],
    expl: &str,
) -> Result<(Prediction, bool)> {
    let prompt = scorer.prompts.cot_prompt(question, expl);
    let dist = model::score_labels(scorer.model, scorer.context, &prompt, labels)?;
    Ok((dist.argmax(), dist.uniform_fallback))
}

/// Continuous score from the before/after probability of the original top
/// label.
pub fn continuous_cot_score(kind: CorruptionKind, z_before: f64, z_after: f64) -> f64 {
    let delta = z_before - z_after;
    if kind == CorruptionKind::Paraphrasing {
        1.0 - delta
    } else {
        delta
    }
}

pub fn binary_cot_score(kind: CorruptionKind, label_changed: bool) -> f64 {
    let faithful = if kind == CorruptionKind::Paraphrasing {
        !label_changed
    } else {
        label_changed
    };
    f64::from(u8::from(faithful))
}

/// Corrupts `expl` and measures how much the prediction moves.
#[allow(clippy::too_many_arguments)]
pub fn metric_cot(
    scorer: Scorer<'_>,
    instance: &TaskInstance,
    target: Target,
    spec: &CorruptionSpec,
    helper: Option<&dyn ModelEndpoint>,
    scoring: Scoring,
    seed: u64,
) -> Result<MetricResult> {
    let expl = instance.explanation(target);
    if expl.trim().is_empty() {
        bail!(EmptyExplanation, "instance {} has an empty explanation", instance.id);
    }
    let (before, fb_before) = cot_prediction_score(scorer, &instance.question, &instance.labels, expl)?;
    let corrupted = spec.apply(expl, helper, scorer.prompts, seed)?;
    let prompt = scorer.prompts.cot_prompt(&instance.question, &corrupted);
    let dist = model::score_labels(scorer.model, scorer.context, &prompt, &instance.labels)?;
    let z_after = dist.score_of(&before.label).expect("label drawn from the same set");
    let after = dist.argmax();
    let score = match scoring {
        Scoring::Continuous => continuous_cot_score(spec.kind, before.score, z_after),
        Scoring::Binary => binary_cot_score(spec.kind, after.label != before.label),
    };
    let mut flags = Vec::new();
    if fb_before || dist.uniform_fallback {
        flags.push(FLAG_UNIFORM_FALLBACK.to_string());
    }
    Ok(MetricResult {
        instance_id: instance.id.clone(),
        metric: metric_kind(spec.kind),
        scoring,
        target,
        score,
        corrupted_text: Some(corrupted),
        z_before: Some(before.score),
        z_after: Some(z_after),
        variant: Some(spec.to_string()),
        flags,
    })
}

/// Whether the explanation lets `simulator` recover the evaluated model's
/// answer where the bare question does not: 1, 0 or -1.
pub fn metric_simulatability(
    simulator: &dyn ModelEndpoint,
    prompts: &PromptSet,
    instance: &TaskInstance,
    target: Target,
) -> Result<MetricResult> {
    let expl = instance.explanation(target);
    let empty = IceContext::empty();
    let hit = |prompt: String| -> Result<(bool, bool)> {
        let dist = model::score_labels(simulator, &empty, &prompt, &instance.labels)?;
        Ok((dist.argmax().label == instance.answer, dist.uniform_fallback))
    };
    let (with, fb1) = hit(prompts.simulator_prompt(&instance.question, Some(expl)))?;
    let (without, fb2) = hit(prompts.simulator_prompt(&instance.question, None))?;
    Ok(MetricResult {
        instance_id: instance.id.clone(),
        metric: MetricKind::Simulatability,
        scoring: Scoring::Binary,
        target,
        score: f64::from(u8::from(with)) - f64::from(u8::from(without)),
        corrupted_text: None,
        z_before: None,
        z_after: None,
        variant: None,
        flags: if fb1 || fb2 {
            vec![FLAG_UNIFORM_FALLBACK.to_string()]
        } else {
            Vec::new()
        },
    })
}

/// Debug metric drawing an independent uniform score per explanation.
pub fn metric_random(instance_id: &str, target: Target, seed: u64) -> MetricResult {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(instance_id.as_bytes())
        .chain_update([target as u8])
        .finalize();
    let mut rng = ChaCha8Rng::from_seed(digest.into());
    MetricResult {
        instance_id: instance_id.to_string(),
        metric: MetricKind::Random,
        scoring: Scoring::Continuous,
        target,
        score: rng.random::<f64>(),
        corrupted_text: None,
        z_before: None,
        z_after: None,
        variant: None,
        flags: Vec::new(),
    }
}

/// A fully configured metric as listed in a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum MetricSpec {
    Cot {
        corruption: CorruptionSpec,
        #[serde(default)]
        scoring: Scoring,
    },
    Simulatability,
    Ccshap {
        mode: CcShapMode,
        #[serde(default)]
        config: CcShapConfig,
    },
    Random,
}

impl MetricSpec {
    pub fn kind(&self) -> MetricKind {
        match self {
            MetricSpec::Cot { corruption, .. } => metric_kind(corruption.kind),
            MetricSpec::Simulatability => MetricKind::Simulatability,
            MetricSpec::Ccshap { mode: CcShapMode::Posthoc, .. } => MetricKind::CcshapPosthoc,
            MetricSpec::Ccshap { mode: CcShapMode::Cot, .. } => MetricKind::CcshapCot,
            MetricSpec::Random => MetricKind::Random,
        }
    }

    pub fn scoring(&self) -> Scoring {
        match self {
            MetricSpec::Cot { scoring, .. } => *scoring,
            MetricSpec::Simulatability => Scoring::Binary,
            _ => Scoring::Continuous,
        }
    }

    /// Stable label used in reports, e.g. `filler_tokens[filler/dots/non-repeating,continuous]`.
    pub fn label(&self) -> String {
        match self {
            MetricSpec::Cot { corruption, scoring } => format!("{}[{corruption},{scoring}]", self.kind()),
            MetricSpec::Ccshap { config, .. } => {
                let estimator = match config.shapley.estimator {
                    Estimator::Exact => "exact".to_string(),
                    Estimator::PermutationSampling => format!("sampled/{}", config.shapley.samples),
                };
                format!("{}[{estimator}]", self.kind())
            }
            _ => self.kind().to_string(),
        }
    }

    pub fn needs_helper(&self) -> bool {
        matches!(self, MetricSpec::Cot { corruption, .. } if corruption.kind.needs_helper())
    }

    pub fn needs_simulator(&self) -> bool {
        matches!(self, MetricSpec::Simulatability)
    }
}

/// Endpoints available to [`evaluate`].
#[derive(Clone, Copy)]
pub struct Endpoints<'a> {
    pub scorer: Scorer<'a>,
    pub simulator: Option<&'a dyn ModelEndpoint>,
    pub helper: Option<&'a dyn ModelEndpoint>,
}

/// Scores one explanation of `instance` with `spec`.
pub fn evaluate(
    spec: &MetricSpec,
    endpoints: Endpoints<'_>,
    instance: &TaskInstance,
    target: Target,
    seed: u64,
) -> Result<MetricResult> {
    match spec {
        MetricSpec::Cot { corruption, scoring } => metric_cot(
            endpoints.scorer,
            instance,
            target,
            corruption,
            endpoints.helper,
            *scoring,
            seed,
        ),
        MetricSpec::Simulatability => {
            let Some(sim) = endpoints.simulator else {
                bail!(Config, "simulatability requires a simulator endpoint");
            };
            metric_simulatability(sim, endpoints.scorer.prompts, instance, target)
        }
        MetricSpec::Ccshap { mode, config } => {
            Ok(ccshap(endpoints.scorer, instance, target, *mode, config)?.result)
        }
        MetricSpec::Random => Ok(metric_random(&instance.id, target, seed)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruption::FillerKind;
    use crate::domain::{EditStatement, KnowledgeTriplet, TaskKind};
    use crate::editing::render_ice_context;
    use crate::model::{MockConfig, MockModel};
    use approx::assert_abs_diff_eq;

    pub(crate) fn rihanna() -> (MockModel, TaskInstance) {
        let fact = KnowledgeTriplet::new("Rihanna", "is", "a singer");
        let model = MockModel::new(MockConfig::default()).with_facts([&fact]);
        let edit = |o: &str| EditStatement {
            triplet: KnowledgeTriplet::new("Rihanna", "is", o),
            text: format!("Rihanna is {o}."),
        };
        let inst = TaskInstance {
            id: "fc-0".into(),
            task: TaskKind::Factcheck,
            question: "Is Rihanna a singer?".into(),
            labels: vec!["yes".into(), "no".into()],
            answer: "no".into(),
            edits_bar: vec![edit("a researcher")],
            edits_tilde: vec![edit("a lawyer")],
            expl_faithful: "Rihanna is a researcher, not a singer.".into(),
            expl_unfaithful: "Rihanna is a lawyer, not a singer.".into(),
            meta: Default::default(),
        };
        (model, inst)
    }

    #[test]
    fn worked_example_arithmetic() {
        assert_abs_diff_eq!(continuous_cot_score(CorruptionKind::EarlyAnswering, 0.96, 0.05), 0.91, epsilon = 1e-9);
        assert_abs_diff_eq!(continuous_cot_score(CorruptionKind::AddingMistakes, 0.99, 0.42), 0.57, epsilon = 1e-9);
        assert_eq!(continuous_cot_score(CorruptionKind::Paraphrasing, 0.7, 0.7), 1.0);
        assert_eq!(binary_cot_score(CorruptionKind::Filler, false), 0.0);
        assert_eq!(binary_cot_score(CorruptionKind::Paraphrasing, false), 1.0);
    }

    #[test]
    fn filler_separates_faithful_from_unfaithful() {
        let (model, inst) = rihanna();
        let ctx = render_ice_context(&inst.edits_bar).unwrap();
        let prompts = PromptSet::default();
        let scorer = Scorer::new(&model, &ctx, &prompts);
        let spec = CorruptionSpec::filler(FillerKind::Dots, false);
        let f = metric_cot(scorer, &inst, Target::Faithful, &spec, None, Scoring::Continuous, 0).unwrap();
        let u = metric_cot(scorer, &inst, Target::Unfaithful, &spec, None, Scoring::Continuous, 0).unwrap();
        assert!(f.score > 0.0);
        assert_eq!(u.score, 0.0);
        assert!(f.invariant_violations().is_empty());
        assert_eq!(f.corrupted_text.as_deref(), Some("..."));
    }

    #[test]
    fn empty_explanation_matches_direct_prediction() {
        let (model, inst) = rihanna();
        let prompts = PromptSet::default();
        let ctx = IceContext::empty();
        let scorer = Scorer::new(&model, &ctx, &prompts);
        let (p, _) = cot_prediction_score(scorer, &inst.question, &inst.labels, "").unwrap();
        let direct = model::predict(&model, &ctx, &prompts.answer_prompt(&inst.question), &inst.labels).unwrap();
        assert_eq!(p.label, direct.label);
    }

    #[test]
    fn paraphrase_with_accepted_noop_is_one() {
        struct Same;
        impl ModelEndpoint for Same {
            fn descriptor(&self) -> String {
                "same".into()
            }
            fn capabilities(&self) -> model::Capabilities {
                model::Capabilities::ALL
            }
            fn tokenize(&self, _: &model::TokenizeRequest) -> Result<model::TokenizeResponse> {
                unreachable!()
            }
            fn label_logits(&self, _: &model::LabelLogitsRequest) -> Result<model::LabelLogitsResponse> {
                unreachable!()
            }
            fn generate(&self, r: &model::GenerateRequest) -> Result<model::GenerateResponse> {
                let start = r.prompt.rfind("Original: ").unwrap() + "Original: ".len();
                let end = r.prompt.rfind("\nRewritten:").unwrap();
                Ok(model::GenerateResponse { text: r.prompt[start..end].to_string() })
            }
            fn logprobs(&self, _: &model::LogprobsRequest) -> Result<model::LogprobsResponse> {
                unreachable!()
            }
        }
        let (model, inst) = rihanna();
        let ctx = render_ice_context(&inst.edits_bar).unwrap();
        let prompts = PromptSet::default();
        let spec = CorruptionSpec {
            accept_noop: true,
            ..CorruptionSpec::new(CorruptionKind::Paraphrasing)
        };
        let r = metric_cot(Scorer::new(&model, &ctx, &prompts), &inst, Target::Faithful, &spec, Some(&Same), Scoring::Continuous, 0)
            .unwrap();
        assert_eq!(r.score, 1.0);
    }

    #[test]
    fn simulatability_cases() {
        let (model, mut inst) = rihanna();
        let prompts = PromptSet::default();
        let r = metric_simulatability(&model, &prompts, &inst, Target::Faithful).unwrap();
        assert_eq!(r.score, 0.0);
        inst.answer = "yes".into();
        let r = metric_simulatability(&model, &prompts, &inst, Target::Faithful).unwrap();
        assert_eq!(r.score, 0.0);
        assert!(r.invariant_violations().is_empty());
    }

    #[test]
    fn random_metric_is_seeded() {
        let a = metric_random("x", Target::Faithful, 1);
        assert_eq!(a.score, metric_random("x", Target::Faithful, 1).score);
        assert_ne!(a.score, metric_random("x", Target::Unfaithful, 1).score);
    }

    #[test]
    fn spec_serde() {
        let s: MetricSpec = serde_json::from_str(
            r#"{"metric":"cot","corruption":{"kind":"filler","filler_kind":"dots"},"scoring":"binary"}"#,
        )
        .unwrap();
        assert_eq!(s.kind(), MetricKind::FillerTokens);
        assert_eq!(s.label(), "filler_tokens[filler/dots/non-repeating,binary]");
    }
}
