//! Content-addressed on-disk vector store.
//!
//! Layout: `<root>/<first two hex chars>/<sha256 hex>.vec`, holding the
//! dimension as a little-endian `u64` followed by that many little-endian
//! `f64` values. Entries are written once via temp file + rename, so
//! concurrent writers of the same key race harmlessly.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use crate::embedding::Embedding;
use crate::error::{Error, Result};

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct DiskCache {
    root: PathBuf,
}

/// Hex SHA-256 over the NUL-separated parts.
pub fn cache_key(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h.update([0u8]);
        }
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

impl DiskCache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2]).join(format!("{key}.vec"))
    }

    /// A missing entry is `None`; an unreadable or corrupt one is logged and
    /// treated as missing.
    pub fn get(&self, key: &str) -> Option<Embedding> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::NotFound => return None,
            Err(e) => {
                tracing::warn!(path = %path.display(), "cache read failed: {e}");
                return None;
            }
        };
        match decode(&bytes) {
            Some(v) => Some(v),
            None => {
                tracing::warn!(path = %path.display(), "ignoring corrupt cache entry");
                None
            }
        }
    }

    pub fn put(&self, key: &str, emb: &Embedding) -> Result<()> {
        let path = self.path_for(key);
        if path.exists() {
            return Ok(());
        }
        let dir = path.parent().expect("entry has a parent dir");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tmp =
            dir.join(format!(".{key}.{}.{}.tmp", std::process::id(), TMP_COUNTER.fetch_add(1, Ordering::Relaxed)));
        fs::write(&tmp, encode(emb)).map_err(|e| Error::io(&tmp, e))?;
        if let Err(e) = fs::rename(&tmp, &path) {
            let _ = fs::remove_file(&tmp);
            if !path.exists() {
                return Err(Error::io(&path, e));
            }
        }
        Ok(())
    }
}

fn encode(emb: &Embedding) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * emb.dim());
    out.extend_from_slice(&(emb.dim() as u64).to_le_bytes());
    for v in emb.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> Option<Embedding> {
    let (head, body) = bytes.split_at_checked(8)?;
    let dim = u64::from_le_bytes(head.try_into().ok()?) as usize;
    if body.len() != dim.checked_mul(8)? {
        return None;
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Embedding::new(values).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::open(dir.path()).unwrap();
        let key = cache_key(&["remote-http", "m", "hello"]);
        assert!(cache.get(&key).is_none());
        let e = Embedding::new(vec![0.1, -3.25e-300, 7.0]).unwrap();
        cache.put(&key, &e).unwrap();
        cache.put(&key, &e).unwrap();
        assert_eq!(cache.get(&key).unwrap(), e);
        let p = cache.path_for(&key);
        assert_eq!(p.parent().unwrap().file_name().unwrap().to_str().unwrap(), &key[..2]);
        assert_eq!(fs::metadata(&p).unwrap().len(), 8 + 24);
    }

    #[test]
    fn corrupt_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::open(dir.path()).unwrap();
        let key = cache_key(&["x"]);
        let p = cache.path_for(&key);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(&p, [1, 0, 0]).unwrap();
        assert!(cache.get(&key).is_none());
    }

    #[test]
    fn key_separates_parts() {
        assert_ne!(cache_key(&["ab", "c"]), cache_key(&["a", "bc"]));
    }
}
