//! In-context editing: edit statements from triplets, and their rendering
//! into the prompt prefix.

use crate::domain::{EditStatement, KnowledgeTriplet, TaskKind};
use crate::error::{bail, Result};
use crate::model::{IceContext, DEFAULT_ICE_PREAMBLE, FACT_PREFIX};
use crate::text::{CAPITAL_OF, CITY_OF, IS, LOCATED_IN};

fn statement(t: &KnowledgeTriplet, text: String) -> EditStatement {
    EditStatement {
        triplet: t.clone(),
        text,
    }
}

/// One statement per triplet using the task's template. Factcheck uses the
/// plain "S R O." rendering; multihop edits need caller sentences (see
/// [`pass_through`]).
pub fn build_edit_statements(task: TaskKind, triplets: &[KnowledgeTriplet]) -> Result<Vec<EditStatement>> {
    triplets
        .iter()
        .map(|t| {
            if !t.is_valid() {
                bail!(InvalidInstance, "invalid triplet {t}");
            }
            let text = match (task, t.relation.as_str()) {
                (TaskKind::Analogy, CAPITAL_OF) => format!("The capital of {} is {}.", t.subject, t.object),
                (TaskKind::Analogy, CITY_OF) => format!("{} is a city in {}.", t.subject, t.object),
                (TaskKind::Objectcount, IS) => format!("{} is {}.", t.subject, t.object),
                (TaskKind::Objectcount, LOCATED_IN) => format!("{} is located in {}.", t.subject, t.object),
                (TaskKind::Factcheck, r) => format!("{} {r} {}.", t.subject, t.object),
                (task, r) => bail!(UnsupportedTask, "no {task} edit template for relation '{r}'"),
            };
            Ok(statement(t, text))
        })
        .collect()
}

/// Pairs triplets with externally written sentences, in order.
pub fn pass_through(triplets: &[KnowledgeTriplet], sentences: &[String]) -> Result<Vec<EditStatement>> {
    if triplets.len() != sentences.len() {
        bail!(
            ShapeMismatch,
            "{} triplets but {} sentences",
            triplets.len(),
            sentences.len()
        );
    }
    triplets
        .iter()
        .zip(sentences)
        .map(|(t, s)| {
            let e = statement(t, s.trim().to_string());
            if !e.is_well_formed() {
                bail!(InvalidInstance, "sentence '{s}' does not render {t}");
            }
            Ok(e)
        })
        .collect()
}

pub fn render_ice_context(edits: &[EditStatement]) -> Result<IceContext> {
    render_ice_context_with(edits, DEFAULT_ICE_PREAMBLE)
}

pub fn render_ice_context_with(edits: &[EditStatement], preamble: &str) -> Result<IceContext> {
    if edits.is_empty() {
        bail!(NoEdits, "cannot render an edit context without edits");
    }
    Ok(IceContext {
        preamble: preamble.to_string(),
        lines: edits
            .iter()
            .map(|e| format!("{FACT_PREFIX}{}", e.text))
            .collect(),
    })
}
