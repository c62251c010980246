//! Shared domain types, instance validation and the dataset file schema.
//!
//! Datasets are JSON Lines: one [`TaskInstance`] per line, UTF-8, with the
//! field names `id, task, question, labels, answer, edits_bar, edits_tilde,
//! expl_faithful, expl_unfaithful, meta`. Edit statements serialize flat as
//! `{subject, relation, object, text}`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, ErrorCode, Result};

/// A (subject, relation, object) unit of editable model knowledge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KnowledgeTriplet {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl KnowledgeTriplet {
    pub fn new(
        subject: impl Into<String>,
        relation: impl Into<String>,
        object: impl Into<String>,
    ) -> Self {
        KnowledgeTriplet {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }

    pub fn is_valid(&self) -> bool {
        !self.subject.trim().is_empty()
            && !self.relation.trim().is_empty()
            && !self.object.trim().is_empty()
    }
}

impl fmt::Display for KnowledgeTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.relation, self.object)
    }
}

/// A counterfactual fact and its one-sentence rendering.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EditStatement {
    #[serde(flatten)]
    pub triplet: KnowledgeTriplet,
    pub text: String,
}

impl EditStatement {
    /// Rendered text must end with a period and mention subject and object verbatim.
    pub fn is_well_formed(&self) -> bool {
        self.triplet.is_valid()
            && self.text.ends_with('.')
            && self.text.contains(self.triplet.subject.trim())
            && self.text.contains(self.triplet.object.trim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Factcheck,
    Analogy,
    Objectcount,
    Multihop,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::Factcheck,
        TaskKind::Analogy,
        TaskKind::Objectcount,
        TaskKind::Multihop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Factcheck => "factcheck",
            TaskKind::Analogy => "analogy",
            TaskKind::Objectcount => "objectcount",
            TaskKind::Multihop => "multihop",
        }
    }

    /// The fixed binary label set used for this task.
    pub fn label_set(self) -> [&'static str; 2] {
        match self {
            TaskKind::Factcheck => ["yes", "no"],
            _ => ["A", "B"],
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "factcheck" => Ok(TaskKind::Factcheck),
            "analogy" => Ok(TaskKind::Analogy),
            "objectcount" => Ok(TaskKind::Objectcount),
            "multihop" => Ok(TaskKind::Multihop),
            other => bail!(UnsupportedTask, "unknown task '{other}'"),
        }
    }
}

/// One evaluation item with its paired edits and paired explanations.
///
/// `edits_bar` defines the evaluated model and `expl_faithful` is faithful
/// to it; `edits_tilde` defines the counterfactual sibling model that
/// `expl_unfaithful` was written for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub task: TaskKind,
    pub question: String,
    pub labels: Vec<String>,
    pub answer: String,
    pub edits_bar: Vec<EditStatement>,
    pub edits_tilde: Vec<EditStatement>,
    pub expl_faithful: String,
    pub expl_unfaithful: String,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl TaskInstance {
    pub fn explanation_pair(&self) -> ExplanationPair {
        ExplanationPair {
            instance_id: self.id.clone(),
            faithful: self.expl_faithful.clone(),
            unfaithful: self.expl_unfaithful.clone(),
        }
    }

    pub fn explanation(&self, target: Target) -> &str {
        match target {
            Target::Faithful => &self.expl_faithful,
            Target::Unfaithful => &self.expl_unfaithful,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationPair {
    pub instance_id: String,
    pub faithful: String,
    pub unfaithful: String,
}

impl ExplanationPair {
    pub fn is_valid(&self) -> bool {
        self.faithful != self.unfaithful
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    EmptyId,
    EmptyQuestion,
    LabelCount,
    DuplicateLabels,
    WrongLabelSet,
    MultiTokenLabel,
    AnswerNotInLabels,
    DegeneratePair,
    EmptyExplanation,
    IdenticalEdits,
    InvalidEdit,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptyId => "EMPTY_ID",
            ViolationCode::EmptyQuestion => "EMPTY_QUESTION",
            ViolationCode::LabelCount => "LABEL_COUNT",
            ViolationCode::DuplicateLabels => "DUPLICATE_LABELS",
            ViolationCode::WrongLabelSet => "WRONG_LABEL_SET",
            ViolationCode::MultiTokenLabel => "MULTI_TOKEN_LABEL",
            ViolationCode::AnswerNotInLabels => "ANSWER_NOT_IN_LABELS",
            ViolationCode::DegeneratePair => "DEGENERATE_PAIR",
            ViolationCode::EmptyExplanation => "EMPTY_EXPLANATION",
            ViolationCode::IdenticalEdits => "IDENTICAL_EDITS",
            ViolationCode::InvalidEdit => "INVALID_EDIT",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, detail: impl Into<String>) {
        self.violations.push(Violation {
            code,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{} ({})", v.code, v.detail))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks every [`TaskInstance`] invariant and reports all violations.
pub fn validate_instance(instance: &TaskInstance) -> ValidationReport {
    let mut report = ValidationReport::default();

    if instance.id.trim().is_empty() {
        report.push(ViolationCode::EmptyId, "id is empty");
    }
    if instance.question.trim().is_empty() {
        report.push(ViolationCode::EmptyQuestion, "question is empty");
    }

    let labels = &instance.labels;
    if labels.len() != 2 {
        report.push(
            ViolationCode::LabelCount,
            format!("expected 2 labels, found {}", labels.len()),
        );
    }
    if labels.len() == 2 && labels[0] == labels[1] {
        report.push(ViolationCode::DuplicateLabels, format!("label '{}' repeated", labels[0]));
    }
    let expected = instance.task.label_set();
    let mut sorted_labels: Vec<&str> = labels.iter().map(String::as_str).collect();
    sorted_labels.sort_unstable();
    let mut sorted_expected = expected.to_vec();
    sorted_expected.sort_unstable();
    if sorted_labels != sorted_expected {
        report.push(
            ViolationCode::WrongLabelSet,
            format!("{} expects labels {:?}, found {:?}", instance.task, expected, labels),
        );
    }
    for label in labels {
        if label.trim().is_empty() || label.split_whitespace().count() != 1 {
            report.push(
                ViolationCode::MultiTokenLabel,
                format!("label '{label}' is not a single token"),
            );
        }
    }
    if !labels.contains(&instance.answer) {
        report.push(
            ViolationCode::AnswerNotInLabels,
            format!("answer '{}' not in {:?}", instance.answer, labels),
        );
    }

    if instance.expl_faithful.trim().is_empty() || instance.expl_unfaithful.trim().is_empty() {
        report.push(ViolationCode::EmptyExplanation, "explanation text is empty");
    }
    if instance.expl_faithful == instance.expl_unfaithful {
        report.push(
            ViolationCode::DegeneratePair,
            "faithful and unfaithful explanations are identical",
        );
    }

    for (side, edits) in [("edits_bar", &instance.edits_bar), ("edits_tilde", &instance.edits_tilde)] {
        for (i, edit) in edits.iter().enumerate() {
            if !edit.is_well_formed() {
                report.push(
                    ViolationCode::InvalidEdit,
                    format!("{side}[{i}] '{}' is malformed for {}", edit.text, edit.triplet),
                );
            }
        }
    }
    let mut bar = instance.edits_bar.clone();
    let mut tilde = instance.edits_tilde.clone();
    bar.sort();
    tilde.sort();
    if bar == tilde {
        report.push(
            ViolationCode::IdenticalEdits,
            "edits_bar and edits_tilde are equal as multisets",
        );
    }

    report
}

/// Which side of an explanation pair a metric result belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Faithful,
    Unfaithful,
}

impl Target {
    pub const BOTH: [Target; 2] = [Target::Faithful, Target::Unfaithful];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Simulatability,
    EarlyAnswering,
    FillerTokens,
    AddingMistakes,
    Paraphrasing,
    CcshapPosthoc,
    CcshapCot,
    /// Debug baseline that scores explanations uniformly at random.
    Random,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Simulatability => "simulatability",
            MetricKind::EarlyAnswering => "early_answering",
            MetricKind::FillerTokens => "filler_tokens",
            MetricKind::AddingMistakes => "adding_mistakes",
            MetricKind::Paraphrasing => "paraphrasing",
            MetricKind::CcshapPosthoc => "ccshap_posthoc",
            MetricKind::CcshapCot => "ccshap_cot",
            MetricKind::Random => "random",
        }
    }

    /// Copeland category: post-hoc metrics compete with each other, CoT
    /// metrics with each other.
    pub fn category(self) -> &'static str {
        match self {
            MetricKind::Simulatability | MetricKind::CcshapPosthoc => "posthoc",
            MetricKind::Random => "debug",
            _ => "cot",
        }
    }

    pub fn is_cot_corruption(self) -> bool {
        matches!(
            self,
            MetricKind::EarlyAnswering
                | MetricKind::FillerTokens
                | MetricKind::AddingMistakes
                | MetricKind::Paraphrasing
        )
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
            .map_err(|_| Error::new(ErrorCode::Config, format!("unknown metric '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scoring {
    #[default]
    Continuous,
    Binary,
}

impl fmt::Display for Scoring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scoring::Continuous => "continuous",
            Scoring::Binary => "binary",
        })
    }
}

/// Per-instance faithfulness score for one explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub instance_id: String,
    pub metric: MetricKind,
    pub scoring: Scoring,
    pub target: Target,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupted_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_before: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_after: Option<f64>,
    /// Corruption or estimator variant, e.g. `dots/non-repeating`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl MetricResult {
    /// Returns a description of every violated result invariant.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.score.is_finite() {
            out.push(format!("score {} is not finite", self.score));
            return out;
        }
        match (self.metric, self.scoring) {
            (MetricKind::Simulatability, _) => {
                if ![-1.0, 0.0, 1.0].contains(&self.score) {
                    out.push(format!("simulatability score {} not in {{-1,0,1}}", self.score));
                }
            }
            (_, Scoring::Binary) => {
                if self.score != 0.0 && self.score != 1.0 {
                    out.push(format!("binary score {} not in {{0,1}}", self.score));
                }
            }
            (_, Scoring::Continuous) => {
                if !(-1.0..=1.0).contains(&self.score) && self.metric != MetricKind::Paraphrasing {
                    out.push(format!("continuous score {} outside [-1,1]", self.score));
                }
            }
        }
        for z in [self.z_before, self.z_after].into_iter().flatten() {
            if !(0.0..=1.0).contains(&z) {
                out.push(format!("prediction score {z} outside [0,1]"));
            }
        }
        if self.scoring == Scoring::Continuous {
            if let (Some(before), Some(after)) = (self.z_before, self.z_after) {
                let expected = match self.metric {
                    MetricKind::EarlyAnswering | MetricKind::FillerTokens | MetricKind::AddingMistakes => {
                        Some(before - after)
                    }
                    MetricKind::Paraphrasing => Some(1.0 - (before - after)),
                    _ => None,
                };
                if let Some(expected) = expected {
                    if (expected - self.score).abs() > 1e-12 {
                        out.push(format!("score {} != derived {}", self.score, expected));
                    }
                }
            }
        }
        out
    }
}

/// Parses dataset JSONL text. Any malformed or invalid row rejects the
/// whole input with `INVALID_ROW` and the 1-based line number.
pub fn parse_instances(text: &str) -> Result<Vec<TaskInstance>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let instance: TaskInstance = serde_json::from_str(line)
            .map_err(|e| Error::new(ErrorCode::InvalidRow, format!("line {}: {e}", i + 1)))?;
        let report = validate_instance(&instance);
        if !report.is_valid() {
            bail!(InvalidRow, "line {}: {report}", i + 1);
        }
        out.push(instance);
    }
    Ok(out)
}

pub fn read_instances(path: &Path) -> Result<Vec<TaskInstance>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::new(ErrorCode::Io, format!("{}: {e}", path.display())))?;
    parse_instances(&text)
}

/// Writes one JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut file, item)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::new(ErrorCode::Io, format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::new(ErrorCode::InvalidRow, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}
