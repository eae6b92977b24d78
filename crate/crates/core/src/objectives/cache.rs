use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EvalError, Objective, ObjectiveSpec};
use crate::error::Result;
use crate::scalar::Scalar;

/// One persisted cache line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub objective: String,
    pub version: String,
    pub fidelity: usize,
    /// Design coordinates as rounded to 12 decimals.
    pub design: Vec<String>,
    pub value: f64,
}

impl CacheEntry {
    pub fn new(spec: &ObjectiveSpec, x: &[f64], m: usize, value: f64) -> Self {
        Self {
            key: cache_key(spec, x, m),
            objective: spec.name.clone(),
            version: spec.version.clone(),
            fidelity: m,
            design: canonical_design(x),
            value,
        }
    }
}

fn canonical_design(x: &[f64]) -> Vec<String> {
    x.iter()
        .map(|v| {
            let s = format!("{v:.12}");
            // fold -0.000000000000 into 0.000000000000
            if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
                s.trim_start_matches('-').to_string()
            } else {
                s
            }
        })
        .collect()
}

/// SHA-256 over objective name, version, fidelity and the design rounded to
/// 12 decimal digits.
pub fn cache_key(spec: &ObjectiveSpec, x: &[f64], m: usize) -> String {
    let mut h = Sha256::new();
    h.update(spec.name.as_bytes());
    h.update([0]);
    h.update(spec.version.as_bytes());
    h.update([0]);
    h.update(m.to_string().as_bytes());
    for c in canonical_design(x) {
        h.update([0]);
        h.update(c.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Content-addressed store of successful evaluations, optionally backed by
/// an append-only JSON-lines file.
#[derive(Debug, Default)]
pub struct EvalCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, f64>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl EvalCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a persisted cache. Unreadable lines are dropped
    /// with a warning and the file is rewritten from the valid entries.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut entries = HashMap::new();
        if path.exists() {
            let mut valid = Vec::new();
            let mut corrupt = 0usize;
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = match line {
                    Ok(l) => l,
                    Err(_) => {
                        corrupt += 1;
                        continue;
                    }
                };
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(e) if e.value.is_finite() => {
                        entries.insert(e.key.clone(), e.value);
                        valid.push(line);
                    }
                    _ => corrupt += 1,
                }
            }
            if corrupt > 0 {
                log::warn!(
                    "cache {}: dropped {corrupt} unreadable entr{}, rebuilding",
                    path.display(),
                    if corrupt == 1 { "y" } else { "ies" }
                );
                let tmp = path.with_extension("rebuild");
                let mut f = File::create(&tmp)?;
                for l in &valid {
                    writeln!(f, "{l}")?;
                }
                f.sync_all()?;
                fs::rename(&tmp, &path)?;
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        Ok(Self {
            path: Some(path),
            entries: Mutex::new(entries),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        let v = self.entries.lock().expect("cache lock").get(key).copied();
        if v.is_some() {
            self.hits.fetch_add(1, Ordering::SeqCst);
        } else {
            self.misses.fetch_add(1, Ordering::SeqCst);
        }
        v
    }

    pub fn insert(&self, entry: CacheEntry) -> Result<()> {
        let mut map = self.entries.lock().expect("cache lock");
        if map.insert(entry.key.clone(), entry.value).is_none() {
            if let Some(path) = &self.path {
                let mut f = OpenOptions::new().create(true).append(true).open(path)?;
                writeln!(f, "{}", serde_json::to_string(&entry)?)?;
            }
        }
        Ok(())
    }
}

/// Wraps an objective so identical requests are served from an [`EvalCache`].
/// Only successful evaluations are stored.
pub struct CachedObjective<O> {
    inner: O,
    cache: EvalCache,
}

impl<O> CachedObjective<O> {
    pub fn new(inner: O, cache: EvalCache) -> Self {
        Self { inner, cache }
    }

    pub fn cache(&self) -> &EvalCache {
        &self.cache
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<T: Scalar, O: Objective<T>> Objective<T> for CachedObjective<O> {
    fn spec(&self) -> &ObjectiveSpec {
        self.inner.spec()
    }

    fn evaluate(&self, x: &[T], m: usize) -> Result<T, EvalError> {
        let xf: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        let spec = self.inner.spec();
        let key = cache_key(spec, &xf, m);
        if let Some(v) = self.cache.get(&key) {
            return Ok(T::lit(v));
        }
        let v = self.inner.evaluate(x, m)?;
        if let Err(e) = self.cache.insert(CacheEntry::new(spec, &xf, m, v.as_f64())) {
            log::warn!("could not persist cache entry: {e}");
        }
        Ok(v)
    }
}
