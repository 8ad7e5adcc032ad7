//! Deterministic in-process backends: a hash-derived vector per exact byte
//! string, and case-folded bag-of-words counts.

use std::collections::{BTreeSet, HashMap};

use sha2::{Digest, Sha256};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::text;

/// Unit vector expanded from SHA-256 of `text` in counter mode.
pub fn hash_embed(text: &str, dim: usize) -> Result<Embedding> {
    if dim == 0 {
        return Err(Error::Config("hash backend needs dim >= 1".into()));
    }
    let mut values = Vec::with_capacity(dim);
    let mut block = 0u32;
    while values.len() < dim {
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        h.update(block.to_le_bytes());
        let digest = h.finalize();
        for chunk in digest.chunks_exact(8) {
            if values.len() == dim {
                break;
            }
            let u = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            // top 53 bits -> [-1, 1)
            values.push((u >> 11) as f64 / (1u64 << 52) as f64 - 1.0);
        }
        block += 1;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    } else {
        values[0] = 1.0;
    }
    Embedding::new(values)
}

fn is_single_word(entry: &str) -> bool {
    !entry.is_empty() && entry.chars().all(text::is_letter)
}

/// Component `v` counts boundary-delimited, case-folded occurrences of
/// `vocabulary[v]`. Texts sharing no vocabulary give the zero vector.
pub fn bow_embed(text: &str, vocabulary: &[String]) -> Result<Embedding> {
    if vocabulary.is_empty() {
        return Err(Error::Config("bag-of-words backend needs a non-empty vocabulary".into()));
    }
    let folded = text.to_lowercase();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for w in text::letter_runs(&folded) {
        *counts.entry(w).or_default() += 1;
    }
    let values = vocabulary
        .iter()
        .map(|entry| {
            let entry = entry.to_lowercase();
            let n = if is_single_word(&entry) {
                counts.get(entry.as_str()).copied().unwrap_or(0)
            } else {
                text::occurrences(&folded, &entry).count()
            };
            n as f64
        })
        .collect();
    Embedding::new(values)
}

/// Sorted, de-duplicated lowercase letter runs of `texts`.
pub fn vocabulary_from_texts<I, S>(texts: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut words = BTreeSet::new();
    for t in texts {
        for w in text::letter_runs(&t.as_ref().to_lowercase()) {
            words.insert(w.to_string());
        }
    }
    words.into_iter().collect()
}
