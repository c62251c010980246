use std::collections::BTreeMap;

use crate::error::{bail, Result};

/// Cellwise Copeland scores. Within each category every ordered pair of
/// metrics is compared cell by cell: the higher value earns 1, a tie 0.5
/// each.
pub fn copeland(
    table: &BTreeMap<String, Vec<f64>>,
    categories: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, f64>> {
    let mut groups: BTreeMap<&str, Vec<(&str, &[f64])>> = BTreeMap::new();
    for (metric, cells) in table {
        let Some(cat) = categories.get(metric) else {
            bail!(ShapeMismatch, "metric '{metric}' has no category");
        };
        if cells.iter().any(|c| !c.is_finite()) {
            bail!(NonFiniteScore, "metric '{metric}' has a non-finite cell");
        }
        groups.entry(cat).or_default().push((metric, cells));
    }
    let mut scores = BTreeMap::new();
    for (cat, members) in groups {
        let width = members[0].1.len();
        if let Some((m, c)) = members.iter().find(|(_, c)| c.len() != width) {
            bail!(
                ShapeMismatch,
                "category '{cat}': metric '{m}' has {} cells, expected {width}",
                c.len()
            );
        }
        for (name, cells) in &members {
            let points: f64 = members
                .iter()
                .filter(|(other, _)| other != name)
                .flat_map(|(_, theirs)| cells.iter().zip(theirs.iter()))
                .map(|(a, b)| match a.total_cmp(b) {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                })
                .fold(0.0, |acc, p| acc + p);
            scores.insert(name.to_string(), points);
        }
    }
    Ok(scores)
}
