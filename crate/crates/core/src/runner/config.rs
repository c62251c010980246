use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnosticity::DiagnosticityConfig;
use crate::domain::TaskKind;
use crate::error::{bail, Error, ErrorCode, Result};
use crate::metrics::MetricSpec;
use crate::model::{MockConfig, RemoteConfig};
use crate::prompts::PromptSet;
use crate::reliability::ReliabilityConfig;

/// Where a task's instances come from: a JSONL file or the bundled
/// generator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: Option<PathBuf>,
    pub generate: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EndpointSpec {
    Mock(MockConfig),
    Remote(RemoteConfig),
}

impl Default for EndpointSpec {
    fn default() -> Self {
        EndpointSpec::Mock(MockConfig::default())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointsConfig {
    pub main: EndpointSpec,
    pub simulator: Option<EndpointSpec>,
    pub helper: Option<EndpointSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; the rayon default when absent.
    pub concurrency: Option<usize>,
    pub offline: bool,
    pub datasets: BTreeMap<TaskKind, DatasetSpec>,
    pub endpoints: EndpointsConfig,
    pub metrics: Vec<MetricSpec>,
    pub prompts: PromptSet,
    pub diagnosticity: DiagnosticityConfig,
    pub reliability: ReliabilityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            cache_dir: None,
            concurrency: None,
            offline: false,
            datasets: BTreeMap::new(),
            endpoints: EndpointsConfig::default(),
            metrics: Vec::new(),
            prompts: PromptSet::default(),
            diagnosticity: DiagnosticityConfig::default(),
            reliability: ReliabilityConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the file ends in `.json`. Relative dataset
    /// paths resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::new(ErrorCode::Config, format!("{}: {e}", path.display())))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        if let Some(base) = path.parent() {
            let rebase = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            cfg.datasets.values_mut().filter_map(|ds| ds.path.as_mut()).for_each(rebase);
            rebase(&mut cfg.out_dir);
            if let Some(c) = cfg.cache_dir.as_mut() {
                rebase(c);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::new(ErrorCode::Config, e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::new(ErrorCode::Config, e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            bail!(Config, "no datasets configured");
        }
        for (task, ds) in &self.datasets {
            match (&ds.path, ds.generate) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => bail!(Config, "dataset '{task}' needs exactly one of path or generate"),
            }
            if ds.generate == Some(0) {
                bail!(Config, "dataset '{task}' generates no instances");
            }
        }
        if self.metrics.is_empty() {
            bail!(Config, "no metrics configured");
        }
        for m in &self.metrics {
            if m.needs_simulator() && self.endpoints.simulator.is_none() {
                bail!(Config, "metric {} requires endpoints.simulator", m.label());
            }
            if m.needs_helper() && self.endpoints.helper.is_none() {
                bail!(Config, "metric {} requires endpoints.helper", m.label());
            }
        }
        if self.offline {
            let remote = [Some(&self.endpoints.main), self.endpoints.simulator.as_ref(), self.endpoints.helper.as_ref()]
                .into_iter()
                .flatten()
                .any(|e| matches!(e, EndpointSpec::Remote(_)));
            if remote {
                bail!(Config, "offline runs cannot use remote endpoints");
            }
        }
        if self.concurrency == Some(0) {
            bail!(Config, "concurrency must be at least 1");
        }
        let mut labels: Vec<String> = self.metrics.iter().map(MetricSpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            bail!(Config, "metric list contains duplicates");
        }
        self.prompts.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7
out_dir = "runs/demo"

[datasets.factcheck]
generate = 20

[endpoints.main]
kind = "mock"
noise_sigma = 0.5

[[metrics]]
metric = "cot"
scoring = "continuous"
corruption = { kind = "filler", filler_kind = "dots" }

[[metrics]]
metric = "random"

[prompts]
ice_preamble = "Use these facts:"
"#;

    #[test]
    fn toml_and_json_agree() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.prompts.ice_preamble, "Use these facts:");
        assert!(matches!(&cfg.endpoints.main, EndpointSpec::Mock(m) if m.noise_sigma == 0.5));
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn missing_helper_is_config_error() {
        let text = SAMPLE.replace("\"filler\", filler_kind = \"dots\"", "\"adding_mistakes\"");
        let err = RunConfig::from_toml(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.code(), ErrorCode::Config);
        assert!(err.message().contains("helper"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml("sed = 1").unwrap_err();
        assert_eq!(err.code(), ErrorCode::Config);
    }

    #[test]
    fn load_resolves_relative_paths_against_config_dir() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, format!("cache_dir = \"/abs/cache\"\n{SAMPLE}")).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.out_dir, dir.path().join("runs/demo"));
        assert_eq!(cfg.cache_dir.as_deref(), Some(Path::new("/abs/cache")));
    }
}
