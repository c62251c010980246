use std::path::Path;

use crate::domain::{parse_instances, TaskInstance, TaskKind};
use crate::error::{bail, Error, ErrorCode, Result};

/// Parses pre-built multi-hop instances. Rows must be of the multihop task
/// and carry a `hops` count in their metadata.
pub fn parse_multihop(text: &str) -> Result<Vec<TaskInstance>> {
    let instances = parse_instances(text)?;
    let lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1);
    for (inst, line) in instances.iter().zip(lines) {
        if inst.task != TaskKind::Multihop {
            bail!(InvalidRow, "line {line}: task is {}, expected multihop", inst.task);
        }
        match inst.meta.get("hops").map(|h| h.parse::<u32>()) {
            Some(Ok(h)) if h >= 1 => {}
            Some(_) => bail!(InvalidRow, "line {line}: meta.hops is not a positive integer"),
            None => bail!(InvalidRow, "line {line}: missing meta.hops"),
        }
    }
    Ok(instances)
}

pub fn ingest_multihop(path: &Path) -> Result<Vec<TaskInstance>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::new(ErrorCode::Io, format!("{}: {e}", path.display())))?;
    parse_multihop(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sample_parses() {
        let out = parse_multihop(crate::bundled::MULTIHOP_SAMPLE_JSONL).unwrap();
        assert_eq!(out.len(), 20);
        assert!(out.iter().any(|i| i.expl_faithful.contains("Wodehouse died in 1978")));
    }

    #[test]
    fn rejects_rows_with_line_numbers() {
        let good = crate::bundled::MULTIHOP_SAMPLE_JSONL.lines().next().unwrap();
        let mut v: serde_json::Value = serde_json::from_str(good).unwrap();
        v["meta"] = serde_json::json!({});
        let text = format!("{good}\n\n{v}\n");
        let err = parse_multihop(&text).unwrap_err();
        assert_eq!(err.code(), ErrorCode::InvalidRow);
        assert!(err.message().starts_with("line 3:"), "{}", err.message());

        let err = parse_multihop("{not json\n").unwrap_err();
        assert!(err.message().starts_with("line 1:"));
    }
}
