//! Vector similarities, the perturbation bias score, AUC-ROC and rank
//! correlations. Everything here is generic over [`Scalar`].

use std::cmp::Ordering;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityKind {
    #[default]
    Cosine,
    Euclidean,
}

impl FromStr for SimilarityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "euclidean" => Ok(Self::Euclidean),
            other => Err(Error::Config(format!("unknown similarity {other:?}"))),
        }
    }
}

fn check_dims<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T> {
    check_dims(a, b)?;
    let (mut dot, mut na, mut nb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.values().iter().zip(b.values()) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na == T::zero() || nb == T::zero() {
        return Ok(T::zero());
    }
    // sqrt of the product keeps cosine(a, a) exactly 1
    let c = dot / (na * nb).sqrt();
    Ok(c.max(-T::one()).min(T::one()))
}

pub fn euclidean<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T> {
    check_dims(a, b)?;
    let ss: T = a.values().iter().zip(b.values()).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok(ss.sqrt())
}

pub fn similarity<T: Scalar>(kind: SimilarityKind, a: &Embedding<T>, b: &Embedding<T>) -> Result<T> {
    match kind {
        SimilarityKind::Cosine => cosine(a, b),
        SimilarityKind::Euclidean => euclidean(a, b),
    }
}

/// Similarities of all K(K-1)/2 unordered pairs, `(i, j)` with `i < j` in
/// row-major order, and their mean.
pub fn pairwise_mean<T: Scalar>(embs: &[Embedding<T>], kind: SimilarityKind) -> Result<(T, Vec<T>)> {
    let k = embs.len();
    if k < 2 {
        return Err(Error::InvalidInput(format!("pairwise similarity needs K >= 2, got {k}")));
    }
    let mut sims = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            sims.push(similarity(kind, &embs[i], &embs[j])?);
        }
    }
    let mean = sims.iter().copied().sum::<T>() / T::of_usize(sims.len());
    Ok((mean, sims))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StandardErrorMode {
    /// Spread of all pooled pair similarities.
    #[default]
    PooledPairs,
    /// Spread of the per-sample means.
    PerSampleMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasScore<T = f64> {
    pub mean: T,
    pub standard_error: T,
    pub pair_count: usize,
    pub sample_count: usize,
    pub k: usize,
}

/// Sample standard deviation over sqrt(n); 0 for a single value.
fn standard_error<T: Scalar>(values: &[T], mean: T) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let ss: T = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (ss / T::of_usize(n - 1)).sqrt() / T::of_usize(n).sqrt()
}

fn k_from_pairs(pairs: usize) -> Option<usize> {
    // smallest k with k(k-1)/2 >= pairs, then check equality
    let mut k = ((1.0 + (1.0 + 8.0 * pairs as f64).sqrt()) / 2.0).round() as usize;
    while k > 2 && k * (k - 1) / 2 > pairs {
        k -= 1;
    }
    while k * (k - 1) / 2 < pairs {
        k += 1;
    }
    (k * (k - 1) / 2 == pairs).then_some(k)
}

pub fn bias_score<T: Scalar>(per_sample_pair_sims: &[Vec<T>]) -> Result<BiasScore<T>> {
    bias_score_with(per_sample_pair_sims, StandardErrorMode::PooledPairs)
}

/// Grand mean over every pair similarity of every sample.
pub fn bias_score_with<T: Scalar>(per_sample_pair_sims: &[Vec<T>], mode: StandardErrorMode) -> Result<BiasScore<T>> {
    let first =
        per_sample_pair_sims.first().ok_or_else(|| Error::InvalidInput("bias score over zero samples".into()))?;
    let m = first.len();
    if m == 0 || per_sample_pair_sims.iter().any(|s| s.len() != m) {
        return Err(Error::InvalidInput("every sample must contribute the same non-zero number of pairs".into()));
    }
    let k = k_from_pairs(m).ok_or_else(|| Error::InvalidInput(format!("{m} pairs is not K(K-1)/2 for any K")))?;
    let pooled: Vec<T> = per_sample_pair_sims.iter().flatten().copied().collect();
    let mean = pooled.iter().copied().sum::<T>() / T::of_usize(pooled.len());
    let standard_error = match mode {
        StandardErrorMode::PooledPairs => standard_error(&pooled, mean),
        StandardErrorMode::PerSampleMeans => {
            let means: Vec<T> =
                per_sample_pair_sims.iter().map(|s| s.iter().copied().sum::<T>() / T::of_usize(m)).collect();
            let mm = means.iter().copied().sum::<T>() / T::of_usize(means.len());
            standard_error(&means, mm)
        }
    };
    Ok(BiasScore { mean, standard_error, pair_count: pooled.len(), sample_count: per_sample_pair_sims.len(), k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair<T = f64> {
    pub score: T,
    pub positive: bool,
}

impl<T> ScoredPair<T> {
    pub fn new(score: T, positive: bool) -> Self {
        Self { score, positive }
    }
}

/// Midranks (1-based, ties share the average rank) of `values`.
pub fn average_ranks<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = T::of_usize(i + 1 + j) / T::lit(2.0);
        for &p in &idx[i..j] {
            ranks[p] = avg;
        }
        i = j;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (the Mann-Whitney form of ROC AUC).
pub fn auc_roc<T: Scalar>(pairs: &[ScoredPair<T>]) -> Result<T> {
    let n_pos = pairs.iter().filter(|p| p.positive).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass { positives: n_pos, negatives: n_neg });
    }
    if let Some(p) = pairs.iter().find(|p| !p.score.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite score {}", p.score)));
    }
    // midranks are multiples of 1/2, so this sum is exact in f64
    let scores: Vec<f64> = pairs.iter().map(|p| p.score.to_f64().unwrap_or(f64::NAN)).collect();
    let ranks = average_ranks(&scores);
    let rank_sum: f64 = pairs.iter().zip(&ranks).filter(|(p, _)| p.positive).map(|(_, r)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(T::lit(u / (n_pos as f64 * n_neg as f64)))
}

fn check_paired<T: Scalar>(x: &[T], y: &[T]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("{} point(s)", x.len())));
    }
    Ok(())
}

pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    check_paired(x, y)?;
    let n = T::of_usize(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    let r = sxy / (sxx * syy).sqrt();
    Ok(r.max(-T::one()).min(T::one()))
}

pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    check_paired(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn max_human_similarity<T: Scalar>(machine: &Embedding<T>, humans: &[Embedding<T>]) -> Result<T> {
    if humans.is_empty() {
        return Err(Error::InvalidInput("no human summaries".into()));
    }
    let mut best = -T::infinity();
    for h in humans {
        best = best.max(cosine(machine, h)?);
    }
    Ok(best)
}
