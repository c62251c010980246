//! Response caching and call counting wrappers.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{
    Capabilities, GenerateRequest, GenerateResponse, LabelLogitsRequest, LabelLogitsResponse,
    LogprobsRequest, LogprobsResponse, ModelEndpoint, TokenizeRequest, TokenizeResponse,
};
use crate::error::Result;

pub const CACHE_FILE: &str = "responses.jsonl";

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    response: Value,
}

/// Memoizes responses by a hash of (descriptor, operation, request).
/// Errors are never cached.
pub struct CachedEndpoint<E> {
    inner: E,
    descriptor: String,
    memory: Mutex<HashMap<String, Value>>,
    sink: Option<Mutex<BufWriter<File>>>,
    path: Option<PathBuf>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl<E: ModelEndpoint> CachedEndpoint<E> {
    pub fn in_memory(inner: E) -> Self {
        let descriptor = inner.descriptor();
        CachedEndpoint {
            inner,
            descriptor,
            memory: Mutex::new(HashMap::new()),
            sink: None,
            path: None,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    /// Loads `dir/responses.jsonl` if present and appends new responses to it.
    pub fn persistent(inner: E, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(CACHE_FILE);
        let mut memory = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                // A torn final line from an interrupted run is skipped.
                if let Ok(entry) = serde_json::from_str::<Entry>(&line) {
                    memory.insert(entry.key, entry.response);
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut cached = CachedEndpoint::in_memory(inner);
        cached.memory = Mutex::new(memory);
        cached.sink = Some(Mutex::new(BufWriter::new(file)));
        cached.path = Some(path);
        Ok(cached)
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.memory.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn flush(&self) -> Result<()> {
        if let Some(sink) = &self.sink {
            sink.lock().expect("cache sink lock").flush()?;
        }
        Ok(())
    }

    fn key<Req: Serialize>(&self, op: &str, req: &Req) -> String {
        let mut h = Sha256::new();
        h.update(self.descriptor.as_bytes());
        h.update([0]);
        h.update(op.as_bytes());
        h.update([0]);
        h.update(serde_json::to_vec(req).unwrap_or_default());
        hex::encode(h.finalize())
    }

    fn cached<Req, Resp>(&self, op: &str, req: &Req, f: impl FnOnce(&Req) -> Result<Resp>) -> Result<Resp>
    where
        Req: Serialize,
        Resp: Serialize + DeserializeOwned,
    {
        let key = self.key(op, req);
        if let Some(v) = self.memory.lock().expect("cache lock").get(&key) {
            if let Ok(resp) = serde_json::from_value(v.clone()) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(resp);
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let resp = f(req)?;
        let value = serde_json::to_value(&resp)?;
        if let Some(sink) = &self.sink {
            let mut w = sink.lock().expect("cache sink lock");
            serde_json::to_writer(&mut *w, &Entry { key: key.clone(), response: value.clone() })?;
            w.write_all(b"\n")?;
        }
        self.memory.lock().expect("cache lock").insert(key, value);
        Ok(resp)
    }
}

impl<E> Drop for CachedEndpoint<E> {
    fn drop(&mut self) {
        if let Some(sink) = &self.sink {
            if let Ok(mut w) = sink.lock() {
                let _ = w.flush();
            }
        }
    }
}

impl<E: ModelEndpoint> ModelEndpoint for CachedEndpoint<E> {
    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }
    fn tokenize(&self, req: &TokenizeRequest) -> Result<TokenizeResponse> {
        self.cached("tokenize", req, |r| self.inner.tokenize(r))
    }
    fn label_logits(&self, req: &LabelLogitsRequest) -> Result<LabelLogitsResponse> {
        self.cached("label_logits", req, |r| self.inner.label_logits(r))
    }
    fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse> {
        self.cached("generate", req, |r| self.inner.generate(r))
    }
    fn logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse> {
        self.cached("logprobs", req, |r| self.inner.logprobs(r))
    }
}

/// Counts every call that reaches the wrapped endpoint.
pub struct CountingEndpoint<E> {
    inner: E,
    calls: AtomicUsize,
}

impl<E> CountingEndpoint<E> {
    pub fn new(inner: E) -> Self {
        CountingEndpoint {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn tick(&self) {
        self.calls.fetch_add(1, Ordering::Relaxed);
    }
}

impl<E: ModelEndpoint> ModelEndpoint for CountingEndpoint<E> {
    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }
    fn tokenize(&self, req: &TokenizeRequest) -> Result<TokenizeResponse> {
        self.tick();
        self.inner.tokenize(req)
    }
    fn label_logits(&self, req: &LabelLogitsRequest) -> Result<LabelLogitsResponse> {
        self.tick();
        self.inner.label_logits(req)
    }
    fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse> {
        self.tick();
        self.inner.generate(req)
    }
    fn logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse> {
        self.tick();
        self.inner.logprobs(req)
    }
}
