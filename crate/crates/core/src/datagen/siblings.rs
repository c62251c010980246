use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{bail, Error, ErrorCode, Result};
use crate::text::normalize_entity;

pub const DEFAULT_SPARQL_ENDPOINT: &str = "https://query.wikidata.org/sparql";
pub const SIBLING_LIMIT: usize = 50;

/// Finds entities sharing a class with a given entity: preloaded map first,
/// then the on-disk cache, then the knowledge-graph endpoint.
pub struct SiblingClient {
    pub endpoint: String,
    pub cache_dir: Option<PathBuf>,
    pub offline: bool,
    pub min_interval: Duration,
    preloaded: BTreeMap<String, Vec<String>>,
    last_request: Mutex<Option<Instant>>,
}

#[derive(Deserialize)]
struct SparqlResponse {
    results: SparqlResults,
}

#[derive(Deserialize)]
struct SparqlResults {
    bindings: Vec<BTreeMap<String, SparqlValue>>,
}

#[derive(Deserialize)]
struct SparqlValue {
    value: String,
}

impl Default for SiblingClient {
    fn default() -> Self {
        SiblingClient {
            endpoint: DEFAULT_SPARQL_ENDPOINT.into(),
            cache_dir: None,
            offline: false,
            min_interval: Duration::from_millis(1000),
            preloaded: BTreeMap::new(),
            last_request: Mutex::new(None),
        }
    }
}

impl SiblingClient {
    /// A client that never touches the network and answers from `map`.
    pub fn offline(map: BTreeMap<String, Vec<String>>) -> Self {
        SiblingClient {
            offline: true,
            ..Default::default()
        }
        .with_preloaded(map)
    }

    pub fn with_preloaded(mut self, map: BTreeMap<String, Vec<String>>) -> Self {
        self.preloaded = map.into_iter().map(|(k, v)| (normalize_entity(&k), v)).collect();
        self
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn siblings(&self, entity: &str) -> Result<Vec<String>> {
        let key = normalize_entity(entity);
        if let Some(v) = self.preloaded.get(&key) {
            return non_empty(entity, v.clone());
        }
        if let Some(path) = self.cache_path(&key) {
            if let Ok(text) = std::fs::read_to_string(&path) {
                return non_empty(entity, serde_json::from_str(&text)?);
            }
        }
        if self.offline {
            bail!(FetchFailed, "no cached siblings for '{entity}' and the client is offline");
        }
        let found = self.fetch(entity)?;
        if let Some(path) = self.cache_path(&key) {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, serde_json::to_string(&found)?)?;
        }
        non_empty(entity, found)
    }

    /// Sibling map for every distinct object, as consumed by the factcheck generator.
    pub fn sibling_map<'a>(&self, objects: impl IntoIterator<Item = &'a str>) -> Result<BTreeMap<String, Vec<String>>> {
        let mut out = BTreeMap::new();
        for o in objects {
            let key = normalize_entity(o);
            if let std::collections::btree_map::Entry::Vacant(slot) = out.entry(key) {
                slot.insert(self.siblings(o)?);
            }
        }
        Ok(out)
    }

    fn cache_path(&self, key: &str) -> Option<PathBuf> {
        let digest = hex::encode(Sha256::digest(key.as_bytes()));
        self.cache_dir.as_ref().map(|d| d.join(format!("{}.json", &digest[..16])))
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().expect("rate limiter poisoned");
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn fetch(&self, entity: &str) -> Result<Vec<String>> {
        self.throttle();
        let fail = |e: String| Error::new(ErrorCode::FetchFailed, format!("'{entity}': {e}"));
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        let body: SparqlResponse = agent
            .get(&self.endpoint)
            .query("query", sibling_query(entity))
            .query("format", "json")
            .header("Accept", "application/sparql-results+json")
            .header("User-Agent", "faithdiag/0.1")
            .call()
            .map_err(|e| fail(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| fail(e.to_string()))?;
        let key = normalize_entity(entity);
        let mut out: Vec<String> = Vec::new();
        for b in body.results.bindings {
            if let Some(v) = b.get("label") {
                if normalize_entity(&v.value) != key && !out.contains(&v.value) {
                    out.push(v.value.clone());
                }
            }
        }
        Ok(out)
    }
}

fn non_empty(entity: &str, v: Vec<String>) -> Result<Vec<String>> {
    if v.is_empty() {
        bail!(NoSiblings, "no siblings found for '{entity}'");
    }
    Ok(v)
}

/// Other instances of any class the entity's English label belongs to.
pub fn sibling_query(entity: &str) -> String {
    let label = entity.trim().replace('\\', "\\\\").replace('"', "\\\"");
    format!(
        "SELECT DISTINCT ?label WHERE {{ \
         ?item rdfs:label \"{label}\"@en . \
         ?item wdt:P31 ?class . \
         ?other wdt:P31 ?class . \
         ?other rdfs:label ?label . \
         FILTER(?other != ?item && LANG(?label) = \"en\") \
         }} LIMIT {SIBLING_LIMIT}"
    )
}
