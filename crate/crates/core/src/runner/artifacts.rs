use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnosticity::{copeland, DiagnosticityReport};
use crate::domain::TaskKind;
use crate::error::{Error, ErrorCode, Result};

pub const REPORTS_FILE: &str = "reports.json";
pub const TABLE_FILE: &str = "table.csv";
pub const PLOT_FILE: &str = "plot.csv";
pub const COPELAND_FILE: &str = "copeland.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: TaskKind,
    pub category: String,
    #[serde(flatten)]
    pub report: DiagnosticityReport,
}

impl TaskReport {
    pub fn new(task: TaskKind, category: &str, report: DiagnosticityReport) -> Self {
        TaskReport {
            task,
            category: category.to_string(),
            report,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopelandSummary {
    pub cells: Vec<TaskKind>,
    pub scores: BTreeMap<String, f64>,
}

fn first_seen<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn lookup<'a>(reports: &'a [TaskReport], metric: &str, task: TaskKind) -> Option<&'a TaskReport> {
    reports.iter().find(|r| r.report.metric == metric && r.task == task)
}

/// Metrics as rows, tasks as columns, D in each cell.
pub fn table_csv(reports: &[TaskReport]) -> String {
    let tasks = first_seen(reports.iter().map(|r| r.task));
    let metrics = first_seen(reports.iter().map(|r| (r.report.metric.clone(), r.category.clone())));
    let mut out = String::from("metric,category");
    for t in &tasks {
        let _ = write!(out, ",{t}");
    }
    out.push('\n');
    for (m, cat) in &metrics {
        let _ = write!(out, "\"{m}\",{cat}");
        for t in &tasks {
            match lookup(reports, m, *t) {
                Some(r) => {
                    let _ = write!(out, ",{:.3}", r.report.d);
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// One row per (task, metric) with the interval and test result.
pub fn plot_csv(reports: &[TaskReport]) -> String {
    let mut out = String::from("task,metric,category,scoring,n_pairs,D,ci_lo,ci_hi,p_gt_half\n");
    for r in reports {
        let d = &r.report;
        let _ = writeln!(
            out,
            "{},\"{}\",{},{},{},{:.6},{:.6},{:.6},{:.6e}",
            r.task, d.metric, r.category, d.scoring, d.n_pairs, d.d, d.ci95.0, d.ci95.1, d.p_gt_half
        );
    }
    out
}

/// Copeland scores over the tasks, for metrics that cover every task.
pub fn copeland_from_reports(reports: &[TaskReport]) -> Result<CopelandSummary> {
    let tasks = first_seen(reports.iter().map(|r| r.task));
    let mut table = BTreeMap::new();
    let mut categories = BTreeMap::new();
    for (m, cat) in first_seen(reports.iter().map(|r| (r.report.metric.clone(), r.category.clone()))) {
        let cells: Option<Vec<f64>> = tasks.iter().map(|t| lookup(reports, &m, *t).map(|r| r.report.d)).collect();
        match cells {
            Some(c) => {
                table.insert(m.clone(), c);
                categories.insert(m, cat);
            }
            None => log::warn!("metric {m} misses some tasks and is left out of the Copeland table"),
        }
    }
    Ok(CopelandSummary {
        cells: tasks,
        scores: copeland(&table, &categories)?,
    })
}

pub fn read_reports(path: &Path) -> Result<Vec<TaskReport>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::new(ErrorCode::Io, format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes the reports and everything derived from them into `out`.
pub fn render_report(reports: &[TaskReport], out: &Path) -> Result<Vec<(String, PathBuf)>> {
    std::fs::create_dir_all(out)?;
    let copeland = copeland_from_reports(reports)?;
    let files = [
        (REPORTS_FILE, serde_json::to_string_pretty(reports)?),
        (TABLE_FILE, table_csv(reports)),
        (PLOT_FILE, plot_csv(reports)),
        (COPELAND_FILE, serde_json::to_string_pretty(&copeland)?),
    ];
    files
        .into_iter()
        .map(|(name, body)| {
            let path = out.join(name);
            std::fs::write(&path, body)?;
            Ok((name.to_string(), path))
        })
        .collect()
}
