//! Data shipped with the crate so every pipeline runs offline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datagen::{CategoryCatalog, GeoCatalog};
use crate::domain::{KnowledgeTriplet, TaskInstance};

pub const GEO_TSV: &str = include_str!("../data/geo.tsv");
pub const CATEGORIES_JSON: &str = include_str!("../data/categories.json");
pub const FACTCHECK_TRIPLETS_JSONL: &str = include_str!("../data/factcheck_triplets.jsonl");
pub const SIBLINGS_JSON: &str = include_str!("../data/siblings.json");
pub const MULTIHOP_SAMPLE_JSONL: &str = include_str!("../data/multihop_sample.jsonl");
pub const REFERENCE_DIAGNOSTICITY_JSON: &str = include_str!("../data/reference_diagnosticity.json");

pub fn geo_catalog() -> GeoCatalog {
    GeoCatalog::from_tsv(GEO_TSV).expect("bundled geo catalog is valid")
}

pub fn category_catalog() -> CategoryCatalog {
    CategoryCatalog::from_json(CATEGORIES_JSON).expect("bundled category catalog is valid")
}

pub fn factcheck_triplets() -> Vec<KnowledgeTriplet> {
    FACTCHECK_TRIPLETS_JSONL
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled triplet row is valid"))
        .collect()
}

/// Sibling entities keyed by normalized object.
pub fn siblings() -> BTreeMap<String, Vec<String>> {
    serde_json::from_str(SIBLINGS_JSON).expect("bundled sibling cache is valid")
}

pub fn multihop_sample() -> Vec<TaskInstance> {
    crate::datagen::parse_multihop(MULTIHOP_SAMPLE_JSONL).expect("bundled multihop sample is valid")
}

/// Reference per-cell diagnosticity values for seven metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub cells: Vec<String>,
    pub categories: BTreeMap<String, String>,
    pub table: BTreeMap<String, Vec<f64>>,
}

pub fn reference_diagnosticity() -> ReferenceTable {
    serde_json::from_str(REFERENCE_DIAGNOSTICITY_JSON).expect("bundled reference table is valid")
}
