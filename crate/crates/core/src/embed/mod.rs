//! Embedding backends behind one batch interface, with an in-memory memo and
//! an optional on-disk cache in front of every backend.

mod cache;
mod offline;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{cache_key, DiskCache};
pub use offline::{bow_embed, hash_embed, vocabulary_from_texts};

use crate::concurrency::{bounded_map, Throttle};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::http::{self, RetryPolicy};

pub const EMBED_API_KEY_ENV: &str = "EMBED_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[serde(alias = "remote", alias = "http")]
    RemoteHttp,
    #[serde(alias = "hash")]
    HashDeterministic,
    #[serde(alias = "bow")]
    BagOfWords,
}

impl BackendKind {
    pub fn is_deterministic(self) -> bool {
        !matches!(self, BackendKind::RemoteHttp)
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::RemoteHttp => "remote-http",
            BackendKind::HashDeterministic => "hash-deterministic",
            BackendKind::BagOfWords => "bag-of-words",
        })
    }
}

impl FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "remote" | "remote-http" | "http" => Ok(Self::RemoteHttp),
            "hash" | "hash-deterministic" => Ok(Self::HashDeterministic),
            "bow" | "bag-of-words" => Ok(Self::BagOfWords),
            other => Err(Error::Config(format!("unknown backend {other:?} (expected remote, hash or bow)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub model_id: String,
    pub endpoint: Option<String>,
    /// Output size of the hash backend.
    pub dim: Option<usize>,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub cache_dir: Option<PathBuf>,
    /// Bag-of-words vocabulary; its length is the output size.
    pub vocabulary: Option<Vec<String>>,
    pub retry: RetryPolicy,
    pub min_interval_ms: Option<u64>,
    pub timeout_secs: u64,
}

impl Default for BackendSpec {
    fn default() -> Self {
        Self {
            kind: BackendKind::HashDeterministic,
            model_id: "sha256".into(),
            endpoint: None,
            dim: Some(64),
            batch_size: 32,
            max_in_flight: 4,
            cache_dir: None,
            vocabulary: None,
            retry: RetryPolicy::default(),
            min_interval_ms: None,
            timeout_secs: 60,
        }
    }
}

impl BackendSpec {
    pub fn hash(dim: usize) -> Self {
        Self { dim: Some(dim), ..Self::default() }
    }

    pub fn bag_of_words(vocabulary: Vec<String>) -> Self {
        Self {
            kind: BackendKind::BagOfWords,
            model_id: "bow".into(),
            dim: Some(vocabulary.len()),
            vocabulary: Some(vocabulary),
            ..Self::default()
        }
    }

    pub fn remote(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::RemoteHttp,
            model_id: model_id.into(),
            endpoint: Some(endpoint.into()),
            dim: None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_in_flight == 0 {
            return Err(Error::Config("batch_size and max_in_flight must be positive".into()));
        }
        match self.kind {
            BackendKind::RemoteHttp => {
                if self.endpoint.as_deref().is_none_or(str::is_empty) {
                    return Err(Error::Config("remote backend requires an endpoint".into()));
                }
            }
            BackendKind::HashDeterministic => {
                if !self.dim.is_some_and(|d| d >= 1) {
                    return Err(Error::Config("hash backend requires dim >= 1".into()));
                }
            }
            BackendKind::BagOfWords => {
                let Some(vocab) = self.vocabulary.as_ref().filter(|v| !v.is_empty()) else {
                    return Err(Error::Config("bag-of-words backend requires a vocabulary".into()));
                };
                if self.dim.is_some_and(|d| d != vocab.len()) {
                    return Err(Error::Config(format!(
                        "bag-of-words dim {} disagrees with vocabulary size {}",
                        self.dim.unwrap_or(0),
                        vocab.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Model identity used in cache keys. Deterministic backends fold in the
    /// parameters that change their output.
    fn cache_model_id(&self) -> String {
        match self.kind {
            BackendKind::RemoteHttp => self.model_id.clone(),
            BackendKind::HashDeterministic => format!("{}#dim={}", self.model_id, self.dim.unwrap_or(0)),
            BackendKind::BagOfWords => {
                let mut h = Sha256::new();
                for w in self.vocabulary.iter().flatten() {
                    h.update(w.as_bytes());
                    h.update([0u8]);
                }
                format!("{}#vocab={}", self.model_id, hex::encode(&h.finalize()[..8]))
            }
        }
    }

    pub fn backend_id(&self) -> String {
        match self.kind {
            BackendKind::HashDeterministic => format!("{}:{}:{}", self.kind, self.model_id, self.dim.unwrap_or(0)),
            _ => format!("{}:{}", self.kind, self.model_id),
        }
    }
}

/// Anything that turns a batch of texts into order-aligned embeddings.
pub trait TextEmbedder: Send + Sync {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>>;
    fn backend_id(&self) -> String;
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

pub struct Embedder {
    spec: BackendSpec,
    cache_model_id: String,
    api_key: Option<String>,
    agent: Option<ureq::Agent>,
    disk: Option<DiskCache>,
    memo: Mutex<HashMap<String, Embedding>>,
    throttle: Throttle,
    dim: Mutex<Option<usize>>,
    upstream_requests: AtomicUsize,
}

impl fmt::Debug for Embedder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Embedder")
            .field("spec", &self.spec)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish_non_exhaustive()
    }
}

impl Embedder {
    /// Validates `spec`, opens the cache directory and, for remote backends,
    /// reads the bearer token from `EMBED_API_KEY` when set.
    pub fn new(spec: BackendSpec) -> Result<Self> {
        spec.validate()?;
        let disk = spec.cache_dir.as_ref().map(DiskCache::open).transpose()?;
        let remote = spec.kind == BackendKind::RemoteHttp;
        let api_key = if remote { std::env::var(EMBED_API_KEY_ENV).ok().filter(|k| !k.is_empty()) } else { None };
        let agent = remote.then(|| http::agent(Duration::from_secs(spec.timeout_secs.max(1))));
        let throttle = Throttle::new(spec.max_in_flight, spec.min_interval_ms.map(Duration::from_millis));
        let dim = match spec.kind {
            BackendKind::RemoteHttp => None,
            BackendKind::HashDeterministic => spec.dim,
            BackendKind::BagOfWords => spec.vocabulary.as_ref().map(Vec::len),
        };
        Ok(Self {
            cache_model_id: spec.cache_model_id(),
            spec,
            api_key,
            agent,
            disk,
            memo: Mutex::new(HashMap::new()),
            throttle,
            dim: Mutex::new(dim),
            upstream_requests: AtomicUsize::new(0),
        })
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    /// Remote sub-batch requests issued so far (retries not counted).
    pub fn upstream_requests(&self) -> usize {
        self.upstream_requests.load(Ordering::SeqCst)
    }

    fn key(&self, text: &str) -> String {
        cache_key(&[&self.spec.kind.to_string(), &self.cache_model_id, text])
    }

    fn lookup(&self, text: &str) -> Option<Embedding> {
        if let Some(e) = self.memo.lock().unwrap().get(text) {
            return Some(e.clone());
        }
        let e = self.disk.as_ref()?.get(&self.key(text))?;
        self.memo.lock().unwrap().insert(text.to_string(), e.clone());
        Some(e)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        let mut d = self.dim.lock().unwrap();
        match *d {
            Some(expected) if expected != found => Err(Error::DimensionMismatch { expected, found }),
            _ => {
                *d = Some(found);
                Ok(())
            }
        }
    }

    fn store(&self, text: &str, e: &Embedding) -> Result<()> {
        if let Some(disk) = &self.disk {
            disk.put(&self.key(text), e)?;
        }
        self.memo.lock().unwrap().insert(text.to_string(), e.clone());
        Ok(())
    }

    fn fetch_remote(&self, texts: &[&str]) -> std::result::Result<Vec<Embedding>, (u32, String)> {
        let _permit = self.throttle.acquire();
        self.upstream_requests.fetch_add(1, Ordering::SeqCst);
        let body = EmbedRequest { model: &self.spec.model_id, input: texts.to_vec() };
        let url = self.spec.endpoint.as_deref().expect("validated");
        let agent = self.agent.as_ref().expect("remote agent");
        let resp: EmbedResponse = http::post_json(agent, url, self.api_key.as_deref(), &body, &self.spec.retry)
            .map_err(|f| (f.attempts, f.message))?;
        if resp.embeddings.len() != texts.len() {
            return Err((1, format!("expected {} embeddings, got {}", texts.len(), resp.embeddings.len())));
        }
        resp.embeddings.into_iter().map(|v| Embedding::new(v).map_err(|e| (1, e.to_string()))).collect()
    }

    /// Order-aligned embeddings of `texts`. Repeated texts are embedded once.
    pub fn embed_batch<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<Embedding>> {
        if texts.is_empty() {
            return Err(Error::InvalidInput("embed_batch needs at least one text".into()));
        }
        if let Some(i) = texts.iter().position(|t| t.as_ref().is_empty()) {
            return Err(Error::InvalidInput(format!("text {i} is empty")));
        }

        // unique texts in first-seen order, with every input index they cover
        let mut positions: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut unique: Vec<&str> = Vec::new();
        for (i, t) in texts.iter().enumerate() {
            let t = t.as_ref();
            positions
                .entry(t)
                .or_insert_with(|| {
                    unique.push(t);
                    Vec::new()
                })
                .push(i);
        }

        let mut found: HashMap<&str, Embedding> = HashMap::new();
        let mut misses: Vec<&str> = Vec::new();
        for &t in &unique {
            match self.lookup(t) {
                Some(e) => {
                    self.check_dim(e.dim())?;
                    found.insert(t, e);
                }
                None => misses.push(t),
            }
        }

        let fresh: Vec<Embedding> = match self.spec.kind {
            BackendKind::HashDeterministic => {
                let dim = self.spec.dim.expect("validated");
                misses.iter().map(|t| hash_embed(t, dim)).collect::<Result<_>>()?
            }
            BackendKind::BagOfWords => {
                let vocab = self.spec.vocabulary.as_deref().expect("validated");
                misses.iter().map(|t| bow_embed(t, vocab)).collect::<Result<_>>()?
            }
            BackendKind::RemoteHttp if misses.is_empty() => Vec::new(),
            BackendKind::RemoteHttp => {
                let chunks: Vec<&[&str]> = misses.chunks(self.spec.batch_size).collect();
                let results = bounded_map(&chunks, self.spec.max_in_flight, |_, c| self.fetch_remote(c));
                let mut out = Vec::with_capacity(misses.len());
                for (chunk, r) in chunks.iter().zip(results) {
                    match r {
                        Ok(v) => out.extend(v),
                        Err((attempts, message)) => {
                            let mut indices: Vec<usize> =
                                chunk.iter().flat_map(|t| positions[t].iter().copied()).collect();
                            indices.sort_unstable();
                            return Err(Error::Remote { indices, attempts, message });
                        }
                    }
                }
                out
            }
        };

        for (t, e) in misses.iter().zip(fresh) {
            self.check_dim(e.dim())?;
            self.store(t, &e)?;
            found.insert(t, e);
        }

        Ok(texts.iter().map(|t| found[t.as_ref()].clone()).collect())
    }
}

impl TextEmbedder for Embedder {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        self.embed_batch(texts)
    }

    fn backend_id(&self) -> String {
        self.spec.backend_id()
    }
}

/// One-shot convenience wrapper around [`Embedder::embed_batch`].
pub fn embed_batch<S: AsRef<str>>(spec: &BackendSpec, texts: &[S]) -> Result<Vec<Embedding>> {
    Embedder::new(spec.clone())?.embed_batch(texts)
}
