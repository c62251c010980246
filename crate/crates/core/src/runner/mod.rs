//! Orchestration: datasets in, endpoints bound, every metric scored on both
//! explanations of every instance, reports and tables out.

mod artifacts;
mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use artifacts::{
    copeland_from_reports, plot_csv, read_reports, render_report, table_csv, CopelandSummary, TaskReport,
    COPELAND_FILE, MANIFEST_FILE, PLOT_FILE, REPORTS_FILE, TABLE_FILE,
};
pub use config::{DatasetSpec, EndpointSpec, EndpointsConfig, RunConfig};

use crate::datagen::{bundled_world_facts, gen_analogy, gen_factcheck, gen_objectcount, ingest_multihop};
use crate::diagnosticity::{diagnosticity, DiagnosticityReport};
use crate::domain::{read_instances, write_jsonl, MetricResult, Target, TaskInstance, TaskKind};
use crate::editing::render_ice_context_with;
use crate::error::{bail, Error, ErrorCode, Result};
use crate::metrics::{evaluate, Endpoints, MetricSpec, Scorer};
use crate::model::{CachedEndpoint, MockModel, ModelEndpoint, RemoteEndpoint};
use crate::prompts::PromptSet;
use crate::reliability::{edit_reliability, reliability_csv, ReliabilityReport};

pub type Datasets = Vec<(TaskKind, Vec<TaskInstance>)>;

/// Instances from the bundled generators and sample.
pub fn generate_dataset(task: TaskKind, n: usize, seed: u64) -> Result<Vec<TaskInstance>> {
    match task {
        TaskKind::Factcheck => gen_factcheck(
            &crate::bundled::factcheck_triplets(),
            &crate::bundled::siblings(),
            n,
            seed,
        ),
        TaskKind::Analogy => gen_analogy(&crate::bundled::geo_catalog(), n, seed),
        TaskKind::Objectcount => gen_objectcount(&crate::bundled::category_catalog(), n, seed),
        TaskKind::Multihop => {
            let sample = crate::bundled::multihop_sample();
            if n > sample.len() {
                bail!(SamplingExhausted, "{n} multihop instances requested, {} bundled", sample.len());
            }
            Ok(sample.into_iter().take(n).collect())
        }
    }
}

pub fn load_datasets(cfg: &RunConfig) -> Result<Datasets> {
    cfg.datasets
        .iter()
        .map(|(&task, spec)| {
            let instances = match (&spec.path, spec.generate) {
                (Some(path), _) if task == TaskKind::Multihop => ingest_multihop(path)?,
                (Some(path), _) => read_instances(path)?,
                (None, Some(n)) => generate_dataset(task, n, cfg.seed)?,
                (None, None) => bail!(Config, "dataset '{task}' has no source"),
            };
            if let Some(bad) = instances.iter().find(|i| i.task != task) {
                bail!(InvalidRow, "instance {} is {} but listed under {task}", bad.id, bad.task);
            }
            if instances.is_empty() {
                bail!(NoData, "dataset '{task}' is empty");
            }
            Ok((task, instances))
        })
        .collect()
}

type Cache = CachedEndpoint<Arc<dyn ModelEndpoint>>;

/// The endpoints a run scores with, plus the caches wrapping them.
pub struct BoundEndpoints {
    pub main: Arc<dyn ModelEndpoint>,
    pub simulator: Option<Arc<dyn ModelEndpoint>>,
    pub helper: Option<Arc<dyn ModelEndpoint>>,
    caches: Vec<Arc<Cache>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
}

impl BoundEndpoints {
    /// Uses the given endpoints as they are, without caching.
    pub fn direct(
        main: Arc<dyn ModelEndpoint>,
        simulator: Option<Arc<dyn ModelEndpoint>>,
        helper: Option<Arc<dyn ModelEndpoint>>,
    ) -> Self {
        BoundEndpoints {
            main,
            simulator,
            helper,
            caches: Vec::new(),
        }
    }

    pub fn cache_stats(&self) -> Option<CacheStats> {
        (!self.caches.is_empty()).then(|| CacheStats {
            hits: self.caches.iter().map(|c| c.hits()).sum(),
            misses: self.caches.iter().map(|c| c.misses()).sum(),
        })
    }

    pub fn flush(&self) -> Result<()> {
        self.caches.iter().try_for_each(|c| c.flush())
    }

    fn descriptors(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::from([("main".to_string(), self.main.descriptor())]);
        if let Some(s) = &self.simulator {
            out.insert("simulator".into(), s.descriptor());
        }
        if let Some(h) = &self.helper {
            out.insert("helper".into(), h.descriptor());
        }
        out
    }
}

/// Builds a configured endpoint. Mocks know the bundled world and every
/// relation used by the datasets' edits.
pub fn build_endpoint(spec: &EndpointSpec, datasets: &Datasets) -> Result<Arc<dyn ModelEndpoint>> {
    Ok(match spec {
        EndpointSpec::Mock(c) => {
            let relations: BTreeSet<&str> = datasets
                .iter()
                .flat_map(|(_, insts)| insts)
                .flat_map(|i| i.edits_bar.iter().chain(&i.edits_tilde))
                .map(|e| e.triplet.relation.as_str())
                .collect();
            let facts = bundled_world_facts();
            Arc::new(MockModel::new(c.clone()).with_facts(&facts).with_relations(relations))
        }
        EndpointSpec::Remote(c) => Arc::new(RemoteEndpoint::connect(c.clone())?),
    })
}

pub fn bind_endpoints(cfg: &RunConfig, datasets: &Datasets) -> Result<BoundEndpoints> {
    let mut caches = Vec::new();
    let mut bind = |role: &str, spec: &EndpointSpec| -> Result<Arc<dyn ModelEndpoint>> {
        let ep = build_endpoint(spec, datasets)?;
        match &cfg.cache_dir {
            Some(dir) => {
                let cached = Arc::new(CachedEndpoint::persistent(ep, &dir.join(role))?);
                caches.push(cached.clone());
                Ok(cached)
            }
            None => Ok(ep),
        }
    };
    let main = bind("main", &cfg.endpoints.main)?;
    let simulator = cfg.endpoints.simulator.as_ref().map(|s| bind("simulator", s)).transpose()?;
    let helper = cfg.endpoints.helper.as_ref().map(|s| bind("helper", s)).transpose()?;
    Ok(BoundEndpoints {
        main,
        simulator,
        helper,
        caches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub task: TaskKind,
    pub metric: String,
    pub instance_id: String,
    pub code: String,
    pub message: String,
}

/// One metric on one task.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub task: TaskKind,
    pub label: String,
    pub category: String,
    pub results: Vec<MetricResult>,
    pub report: DiagnosticityReport,
    pub failures: Vec<Failure>,
}

/// Scores both explanations on the model edited with `edits_bar`.
fn score_pair(
    spec: &MetricSpec,
    eps: &BoundEndpoints,
    prompts: &PromptSet,
    instance: &TaskInstance,
    seed: u64,
) -> Result<(MetricResult, MetricResult)> {
    let context = render_ice_context_with(&instance.edits_bar, &prompts.ice_preamble)?;
    let endpoints = Endpoints {
        scorer: Scorer::new(eps.main.as_ref(), &context, prompts),
        simulator: eps.simulator.as_deref(),
        helper: eps.helper.as_deref(),
    };
    let f = evaluate(spec, endpoints, instance, Target::Faithful, seed)?;
    let u = evaluate(spec, endpoints, instance, Target::Unfaithful, seed)?;
    Ok((f, u))
}

pub fn evaluate_cell(
    cfg: &RunConfig,
    task: TaskKind,
    spec: &MetricSpec,
    instances: &[TaskInstance],
    eps: &BoundEndpoints,
) -> Result<CellOutcome> {
    let label = spec.label();
    let outcomes: Vec<_> = instances
        .par_iter()
        .map(|inst| score_pair(spec, eps, &cfg.prompts, inst, cfg.seed))
        .collect();
    let mut results = Vec::with_capacity(2 * instances.len());
    let mut pairs = Vec::with_capacity(instances.len());
    let mut failures = Vec::new();
    let mut first_error: Option<Error> = None;
    for (inst, outcome) in instances.iter().zip(outcomes) {
        match outcome {
            Ok((f, u)) => {
                pairs.push((f.score, u.score));
                results.push(f);
                results.push(u);
            }
            Err(e) if e.code() == ErrorCode::Config => return Err(e),
            Err(e) => {
                failures.push(Failure {
                    task,
                    metric: label.clone(),
                    instance_id: inst.id.clone(),
                    code: e.code().to_string(),
                    message: e.message().to_string(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    if !failures.is_empty() {
        log::warn!("{task}/{label}: {} of {} instances failed", failures.len(), instances.len());
    }
    if let (true, Some(e)) = (pairs.is_empty(), first_error) {
        return Err(Error::new(
            e.code(),
            format!("{task}/{label}: every instance failed, first: {}", e.message()),
        ));
    }
    let report = diagnosticity(&label, spec.scoring(), &pairs, &cfg.diagnosticity)?;
    Ok(CellOutcome {
        task,
        label,
        category: spec.kind().category().to_string(),
        results,
        report,
        failures,
    })
}

pub fn evaluate_all(cfg: &RunConfig, datasets: &Datasets, eps: &BoundEndpoints) -> Result<Vec<CellOutcome>> {
    let run = || -> Result<Vec<CellOutcome>> {
        let mut cells = Vec::new();
        for (task, instances) in datasets {
            for spec in &cfg.metrics {
                cells.push(evaluate_cell(cfg, *task, spec, instances, eps)?);
            }
        }
        Ok(cells)
    };
    match cfg.concurrency {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::new(ErrorCode::Config, e.to_string()))?
            .install(run),
        None => run(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub out_dir: std::path::PathBuf,
    pub artifacts: BTreeMap<String, std::path::PathBuf>,
    pub tasks: BTreeMap<TaskKind, usize>,
    pub metrics: Vec<String>,
    pub endpoints: BTreeMap<String, String>,
    pub n_failed: usize,
    pub failures: Vec<Failure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<CacheStats>,
}

#[derive(Serialize)]
struct ResultRow<'a> {
    label: &'a str,
    #[serde(flatten)]
    result: &'a MetricResult,
}

/// Writes every artifact of a finished run and returns the manifest.
pub fn write_artifacts(
    cfg: &RunConfig,
    datasets: &Datasets,
    cells: &[CellOutcome],
    eps: &BoundEndpoints,
) -> Result<RunManifest> {
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out)?;
    let mut artifacts = BTreeMap::new();
    for (task, _) in datasets {
        let rows: Vec<ResultRow> = cells
            .iter()
            .filter(|c| c.task == *task)
            .flat_map(|c| c.results.iter().map(|r| ResultRow { label: &c.label, result: r }))
            .collect();
        let name = format!("results_{task}.jsonl");
        write_jsonl(&out.join(&name), &rows)?;
        artifacts.insert(name.clone(), out.join(name));
    }
    let reports: Vec<TaskReport> = cells
        .iter()
        .map(|c| TaskReport::new(c.task, &c.category, c.report.clone()))
        .collect();
    for (name, path) in render_report(&reports, out)? {
        artifacts.insert(name, path);
    }
    let failures: Vec<Failure> = cells.iter().flat_map(|c| c.failures.clone()).collect();
    eps.flush()?;
    let mut manifest = RunManifest {
        seed: cfg.seed,
        out_dir: out.clone(),
        artifacts: artifacts.clone(),
        tasks: datasets.iter().map(|(t, i)| (*t, i.len())).collect(),
        metrics: cfg.metrics.iter().map(MetricSpec::label).collect(),
        endpoints: eps.descriptors(),
        n_failed: failures.len(),
        failures,
        cache: eps.cache_stats(),
    };
    manifest.artifacts.insert(MANIFEST_FILE.into(), out.join(MANIFEST_FILE));
    std::fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Loads the datasets, binds the configured endpoints and runs everything.
pub fn run_eval(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let datasets = load_datasets(cfg)?;
    let eps = bind_endpoints(cfg, &datasets)?;
    run_eval_with(cfg, &datasets, &eps)
}

/// Runs with caller-supplied datasets and endpoints.
pub fn run_eval_with(cfg: &RunConfig, datasets: &Datasets, eps: &BoundEndpoints) -> Result<RunManifest> {
    let cells = evaluate_all(cfg, datasets, eps)?;
    write_artifacts(cfg, datasets, &cells, eps)
}

pub const RELIABILITY_JSON: &str = "reliability.json";
pub const RELIABILITY_CSV: &str = "reliability.csv";

/// Edit reliability of the main endpoint on every configured task.
pub fn run_reliability(cfg: &RunConfig) -> Result<Vec<ReliabilityReport>> {
    let datasets = load_datasets(cfg)?;
    let eps = bind_endpoints(cfg, &datasets)?;
    let reports = datasets
        .iter()
        .map(|(_, insts)| edit_reliability(eps.main.as_ref(), &cfg.prompts, insts, &cfg.reliability))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join(RELIABILITY_JSON), serde_json::to_string_pretty(&reports)?)?;
    std::fs::write(cfg.out_dir.join(RELIABILITY_CSV), reliability_csv(&reports))?;
    eps.flush()?;
    Ok(reports)
}

/// Writes generated datasets as `{task}.jsonl` under `dir`.
pub fn write_datasets(datasets: &Datasets, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    datasets
        .iter()
        .map(|(task, insts)| {
            let path = dir.join(format!("{task}.jsonl"));
            write_jsonl(&path, insts)?;
            Ok(path)
        })
        .collect()
}
