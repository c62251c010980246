use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use faithdiag_core::datagen::{gen_factcheck, SiblingClient};
use faithdiag_core::diagnosticity::copeland;
use faithdiag_core::domain::{KnowledgeTriplet, TaskKind};
use faithdiag_core::runner::{self, RunConfig};
use faithdiag_core::{bundled, Error, ErrorCode, Result};

#[derive(Parser)]
#[command(name = "faithdiag", version, about = "Diagnosticity of explanation faithfulness metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Never contact the network.
    #[arg(long)]
    offline: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Factcheck,
    Analogy,
    Objectcount,
    Multihop,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Generate task datasets as JSONL.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        task: TaskArg,
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Factcheck source triplets (JSONL of {subject, relation, object}).
        #[arg(long)]
        triplets: Option<PathBuf>,
        /// Directory for fetched sibling entities.
        #[arg(long)]
        siblings_cache: Option<PathBuf>,
    },
    /// Score every configured metric and write diagnosticity reports.
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Measure edit reliability of the main endpoint.
    Reliability {
        #[command(flatten)]
        common: Common,
        /// Score without the edit context.
        #[arg(long)]
        no_edits: bool,
    },
    /// Copeland scores from a reports file or a reference table; the
    /// bundled reference table when no input is given.
    Copeland {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Re-render tables and plots from a reports file.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        reports: PathBuf,
    },
}

fn exit_code(code: ErrorCode) -> u8 {
    use ErrorCode::*;
    match code {
        Config => 2,
        c if c.is_endpoint_failure() => 4,
        FetchFailed => 4,
        _ => 3,
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    cfg.offline |= common.offline;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_triplets(path: &Path) -> Result<Vec<KnowledgeTriplet>> {
    faithdiag_core::domain::read_jsonl(path)
}

fn gen_data(common: &Common, task: TaskArg, n: usize, triplets: Option<&Path>, cache: Option<&Path>) -> Result<()> {
    let seed = common.seed.unwrap_or(0);
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    let tasks: Vec<TaskKind> = match task {
        TaskArg::Factcheck => vec![TaskKind::Factcheck],
        TaskArg::Analogy => vec![TaskKind::Analogy],
        TaskArg::Objectcount => vec![TaskKind::Objectcount],
        TaskArg::Multihop => vec![TaskKind::Multihop],
        TaskArg::All => TaskKind::ALL.to_vec(),
    };
    let mut datasets = Vec::new();
    for t in tasks {
        let instances = match (t, triplets) {
            (TaskKind::Factcheck, Some(path)) => {
                let triplets = read_triplets(path)?;
                let mut client = SiblingClient::default().with_preloaded(bundled::siblings());
                client.offline = common.offline;
                if let Some(dir) = cache {
                    client = client.with_cache_dir(dir);
                }
                let siblings = client.sibling_map(triplets.iter().map(|t| t.object.as_str()))?;
                gen_factcheck(&triplets, &siblings, n, seed)?
            }
            (TaskKind::Multihop, _) => {
                let available = bundled::multihop_sample().len();
                runner::generate_dataset(t, n.min(available), seed)?
            }
            _ => runner::generate_dataset(t, n, seed)?,
        };
        datasets.push((t, instances));
    }
    for path in runner::write_datasets(&datasets, &out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn copeland_cmd(common: &Common, input: Option<&Path>) -> Result<()> {
    let scores = match input {
        None => {
            let r = bundled::reference_diagnosticity();
            copeland(&r.table, &r.categories)?
        }
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::new(ErrorCode::Io, format!("{}: {e}", path.display())))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            if value.is_array() {
                let reports: Vec<runner::TaskReport> = serde_json::from_value(value)?;
                runner::copeland_from_reports(&reports)?.scores
            } else {
                let r: bundled::ReferenceTable = serde_json::from_value(value)?;
                copeland(&r.table, &r.categories)?
            }
        }
    };
    if let Some(out) = &common.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join(runner::COPELAND_FILE), serde_json::to_string_pretty(&scores)?)?;
    }
    print_json(&scores)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            common,
            task,
            n,
            triplets,
            siblings_cache,
        } => gen_data(&common, task, n, triplets.as_deref(), siblings_cache.as_deref()),
        Command::Eval { common } => {
            let cfg = load_config(&common)?;
            let manifest = runner::run_eval(&cfg)?;
            if manifest.n_failed > 0 {
                log::warn!("{} instance evaluations failed; see manifest", manifest.n_failed);
            }
            print_json(&manifest)
        }
        Command::Reliability { common, no_edits } => {
            let mut cfg = load_config(&common)?;
            cfg.validate()?;
            cfg.reliability.apply_edits &= !no_edits;
            let reports = runner::run_reliability(&cfg)?;
            print!("{}", faithdiag_core::reliability::reliability_csv(&reports));
            Ok(())
        }
        Command::Copeland { common, input } => copeland_cmd(&common, input.as_deref()),
        Command::Report { common, reports } => {
            let out = common.out.unwrap_or_else(|| reports.parent().unwrap_or(Path::new(".")).to_path_buf());
            let parsed = runner::read_reports(&reports)?;
            for (_, path) in runner::render_report(&parsed, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.code()))
        }
    }
}
