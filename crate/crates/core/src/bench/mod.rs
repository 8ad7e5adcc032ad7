//! Experiment runners: the perturbation bias measurement, the triplet STS
//! task, the summary-relevance task and the name heatmap.
//!
//! Runners take any [`TextEmbedder`]; pass an [`crate::Embedder`] for the
//! configured backend. Work is spread over samples, but every aggregate is
//! reduced in input order, so results do not depend on `max_in_flight`.

mod data;
mod report;

use std::collections::BTreeMap;
use std::io::Write;

pub use data::{
    bundled_summ_fixture, bundled_triplets, load_summ, load_triplets, parse_summ, parse_triplets, MachineSummary,
    SummSample, Triplet,
};
pub use report::{
    read_report, render_report, write_report, write_reports_csv, DetailRow, ReportFormat, Task, TaskReport,
};

use crate::anonymize::Anonymizer;
use crate::concurrency::bounded_map;
use crate::corpus::Corpus;
use crate::embed::{vocabulary_from_texts, TextEmbedder};
use crate::error::{Error, Result};
use crate::gazetteer::Gazetteer;
use crate::metrics::{
    auc_roc, bias_score_with, cosine, max_human_similarity, pairwise_mean, pearson, spearman, ScoredPair,
    SimilarityKind, StandardErrorMode,
};
use crate::perturb::{generate_perturbations, PerturbationConfig};

/// Marker replaced by each name in a heatmap template.
pub const NAME_SLOT: &str = "CHARACTER_NAME";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiasOptions {
    pub similarity: SimilarityKind,
    pub standard_error: StandardErrorMode,
    pub max_in_flight: usize,
}

impl Default for BiasOptions {
    fn default() -> Self {
        Self { similarity: SimilarityKind::Cosine, standard_error: StandardErrorMode::PooledPairs, max_in_flight: 4 }
    }
}

pub fn run_bias(
    corpus: &Corpus,
    pconfig: &PerturbationConfig,
    gazetteer: &Gazetteer,
    embedder: &dyn TextEmbedder,
    options: &BiasOptions,
) -> Result<TaskReport> {
    pconfig.validate(gazetteer)?;
    let per_sample = bounded_map(&corpus.samples, options.max_in_flight, |_, sample| {
        let set = generate_perturbations(sample, pconfig, gazetteer)?;
        let texts: Vec<String> = set.variants.into_iter().map(|v| v.text).collect();
        let embs = embedder.embed_texts(&texts).map_err(|e| e.for_sample(&sample.id))?;
        pairwise_mean(&embs, options.similarity).map(|(_, sims)| sims).map_err(|e| e.for_sample(&sample.id))
    });

    let mut sims = Vec::with_capacity(per_sample.len());
    let mut skipped = 0usize;
    for r in per_sample {
        match r {
            Ok(s) => sims.push(s),
            Err(e) => {
                skipped += 1;
                tracing::warn!("skipping: {e}");
            }
        }
    }
    if sims.is_empty() {
        return Err(Error::AllSkipped { skipped });
    }
    let score = bias_score_with(&sims, options.standard_error)?;

    let mut report = TaskReport::new(Task::Bias, embedder.backend_id(), "none");
    report.set("mean", score.mean);
    report.set("standard_error", score.standard_error);
    report.set("sample_count", score.sample_count as f64);
    report.set("k", score.k as f64);
    report.set("pair_count", score.pair_count as f64);
    report.set("skipped", skipped as f64);
    report.meta("seed", pconfig.seed);
    report.meta("k", pconfig.k);
    report.meta("mode", mode_label(pconfig));
    report.meta("dataset", &corpus.source_name);
    report.meta("similarity", format!("{:?}", options.similarity).to_lowercase());
    report.meta("standard_error_mode", format!("{:?}", options.standard_error));
    Ok(report)
}

fn mode_label(p: &PerturbationConfig) -> String {
    serde_json::to_value(&p.mode)
        .ok()
        .and_then(|v| {
            let mode = v.get("mode")?.as_str()?.to_string();
            Some(match v.get("country").and_then(|c| c.as_str()) {
                Some(c) => format!("{mode}:{c}"),
                None => mode,
            })
        })
        .unwrap_or_default()
}

/// Vocabulary for the bag-of-words backend on the STS task: every word of
/// the original triplet texts.
pub fn sts_vocabulary(triplets: &[Triplet]) -> Vec<String> {
    vocabulary_from_texts(triplets.iter().flat_map(|t| [&t.query, &t.positive, &t.negative]))
}

pub fn run_sts(triplets: &[Triplet], embedder: &dyn TextEmbedder, anonymizer: &Anonymizer<'_>) -> Result<TaskReport> {
    if triplets.is_empty() {
        return Err(Error::InvalidInput("STS task needs at least one triplet".into()));
    }
    let items: Vec<(String, String)> = triplets
        .iter()
        .flat_map(|t| {
            [("query", &t.query), ("positive", &t.positive), ("negative", &t.negative)]
                .map(|(part, text)| (format!("{}/{part}", t.id), text.clone()))
        })
        .collect();
    let texts = anonymizer.apply_all(&items)?;
    let embs = embedder.embed_texts(&texts)?;

    let mut pairs = Vec::with_capacity(2 * triplets.len());
    let mut details = Vec::with_capacity(triplets.len());
    for (t, e) in triplets.iter().zip(embs.chunks_exact(3)) {
        let pos = cosine(&e[0], &e[1])?;
        let neg = cosine(&e[0], &e[2])?;
        pairs.push(ScoredPair::new(pos, true));
        pairs.push(ScoredPair::new(neg, false));
        details.push(DetailRow {
            id: t.id.clone(),
            values: BTreeMap::from([("positive".to_string(), pos), ("negative".to_string(), neg)]),
        });
    }
    let n = triplets.len() as f64;
    let mut report = TaskReport::new(Task::Sts, embedder.backend_id(), anonymizer.strategy().label());
    report.set("auc_roc", auc_roc(&pairs)?);
    report.set("mean_positive", pairs.iter().filter(|p| p.positive).map(|p| p.score).sum::<f64>() / n);
    report.set("mean_negative", pairs.iter().filter(|p| !p.positive).map(|p| p.score).sum::<f64>() / n);
    report.set("triplets", n);
    report.details = details;
    Ok(report)
}

pub fn run_summ(
    samples: &[SummSample],
    embedder: &dyn TextEmbedder,
    anonymizer: &Anonymizer<'_>,
) -> Result<TaskReport> {
    let machine_total: usize = samples.iter().map(|s| s.machine_summaries.len()).sum();
    if machine_total < 2 {
        return Err(Error::InvalidInput(format!(
            "summary task needs at least 2 machine summaries, got {machine_total}"
        )));
    }
    let mut items = Vec::new();
    for s in samples {
        s.validate()?;
        for (i, m) in s.machine_summaries.iter().enumerate() {
            items.push((format!("{}/m{i}", s.doc_id), m.text.clone()));
        }
        for (i, h) in s.human_summaries.iter().enumerate() {
            items.push((format!("{}/h{i}", s.doc_id), h.clone()));
        }
    }
    let texts = anonymizer.apply_all(&items)?;
    let embs = embedder.embed_texts(&texts)?;

    let mut predicted = Vec::with_capacity(machine_total);
    let mut relevance = Vec::with_capacity(machine_total);
    let mut details = Vec::with_capacity(machine_total);
    let mut at = 0;
    for s in samples {
        let (nm, nh) = (s.machine_summaries.len(), s.human_summaries.len());
        let humans = &embs[at + nm..at + nm + nh];
        for (i, m) in s.machine_summaries.iter().enumerate() {
            let score = max_human_similarity(&embs[at + i], humans)?;
            predicted.push(score);
            relevance.push(m.relevance);
            details.push(DetailRow {
                id: format!("{}/m{i}", s.doc_id),
                values: BTreeMap::from([("predicted".to_string(), score), ("relevance".to_string(), m.relevance)]),
            });
        }
        at += nm + nh;
    }
    let context = |e: Error| match e {
        Error::UndefinedCorrelation(msg) => {
            Error::UndefinedCorrelation(format!("summary task over {} pooled scores: {msg}", predicted.len()))
        }
        other => other,
    };
    let rho = spearman(&predicted, &relevance).map_err(context)?;
    let r = pearson(&predicted, &relevance).map_err(context)?;

    let mut report = TaskReport::new(Task::Summ, embedder.backend_id(), anonymizer.strategy().label());
    report.set("spearman", rho);
    report.set("pearson", r);
    report.set("scores", predicted.len() as f64);
    report.set("documents", samples.len() as f64);
    report.details = details;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub names: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

impl Heatmap {
    /// Name header row, then one row per name led by that name.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.names.iter().zip(&self.matrix) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub fn export_heatmap(template: &str, names: &[String], embedder: &dyn TextEmbedder) -> Result<Heatmap> {
    let slots = template.matches(NAME_SLOT).count();
    if slots != 1 {
        return Err(Error::InvalidInput(format!("template must contain {NAME_SLOT} exactly once, found {slots}")));
    }
    if names.len() < 2 {
        return Err(Error::InvalidInput("heatmap needs at least two names".into()));
    }
    let texts: Vec<String> = names.iter().map(|n| template.replace(NAME_SLOT, n)).collect();
    let embs = embedder.embed_texts(&texts)?;
    let n = names.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let c = cosine(&embs[i], &embs[j])?;
            matrix[i][j] = c;
            matrix[j][i] = c;
        }
    }
    Ok(Heatmap { names: names.to_vec(), matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anonymize::AnonymizationStrategy;
    use crate::corpus::TextSample;
    use crate::embed::{BackendSpec, Embedder};
    use crate::embedding::Embedding;

    /// Same vector for every text.
    struct Constant;
    impl TextEmbedder for Constant {
        fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>> {
            Ok(texts.iter().map(|_| Embedding::new(vec![1.0, 2.0]).unwrap()).collect())
        }
        fn backend_id(&self) -> String {
            "constant".into()
        }
    }

    fn hash() -> Embedder {
        Embedder::new(BackendSpec::hash(32)).unwrap()
    }

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new("t", texts.iter().enumerate().map(|(i, t)| TextSample::new(format!("s{i}"), *t).unwrap()).collect())
    }

    #[test]
    fn bias_entity_free_is_one() {
        let g = Gazetteer::bundled();
        let c = corpus(&["The sky is blue today.", "Rain fell on the quiet hills."]);
        let r = run_bias(&c, &PerturbationConfig::default(), &g, &hash(), &BiasOptions::default()).unwrap();
        assert_eq!(r.metric("mean"), Some(1.0));
        assert_eq!(r.metric("standard_error"), Some(0.0));
        assert_eq!(r.metric("pair_count"), Some(380.0));
    }

    #[test]
    fn bias_hash_backend_sees_names() {
        let g = Gazetteer::bundled();
        let c = corpus(&["Mike has been living in Belgium for five years."]);
        let r = run_bias(&c, &PerturbationConfig::default(), &g, &hash(), &BiasOptions::default()).unwrap();
        assert!(r.metric("mean").unwrap() < 1.0);
        assert_eq!(r.metric("pair_count"), Some(190.0));
        assert_eq!(r.metadata["mode"], "person-and-country");
    }

    #[test]
    fn bias_skips_failures_and_errors_when_all_fail() {
        let g = Gazetteer::builder().persons(["Mike", "Donald"]).countries(["Belgium"]).build().unwrap();
        // two distinct persons with a pool of two cannot be remapped
        let bad = "Mike met Donald.";
        let c = corpus(&[bad, "Nothing to see."]);
        let r = run_bias(&c, &PerturbationConfig::default(), &g, &hash(), &BiasOptions::default()).unwrap();
        assert_eq!(r.metric("skipped"), Some(1.0));
        let c = corpus(&[bad]);
        let e = run_bias(&c, &PerturbationConfig::default(), &g, &hash(), &BiasOptions::default()).unwrap_err();
        assert!(matches!(e, Error::AllSkipped { skipped: 1 }));
    }

    #[test]
    fn sts_constant_backend_is_all_ties() {
        let g = Gazetteer::bundled();
        let a = Anonymizer::new(AnonymizationStrategy::None, &g);
        let r = run_sts(&bundled_triplets(), &Constant, &a).unwrap();
        assert_eq!(r.metric("auc_roc"), Some(0.5));
        assert_eq!(r.details.len(), 10);
    }

    #[test]
    fn summ_degenerate_scores_error() {
        let g = Gazetteer::bundled();
        let a = Anonymizer::new(AnonymizationStrategy::None, &g);
        let e = run_summ(&bundled_summ_fixture(), &Constant, &a).unwrap_err();
        assert!(e.to_string().contains("8 pooled scores"), "{e}");
    }

    #[test]
    fn heatmap_shape() {
        let names: Vec<String> = ["Mike", "Yuan", "Priyanka"].map(String::from).to_vec();
        let h = export_heatmap("CHARACTER_NAME went home.", &names, &hash()).unwrap();
        for i in 0..3 {
            assert_eq!(h.matrix[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(h.matrix[i][j], h.matrix[j][i]);
            }
        }
        let same = vec!["Mike".to_string(), "Mike".to_string()];
        let h = export_heatmap("Hi CHARACTER_NAME.", &same, &hash()).unwrap();
        assert_eq!(h.matrix, vec![vec![1.0; 2]; 2]);
        assert!(export_heatmap("no slot", &names, &hash()).is_err());
        assert!(export_heatmap("CHARACTER_NAME and CHARACTER_NAME", &names, &hash()).is_err());
        assert!(export_heatmap("CHARACTER_NAME", &names[..1], &hash()).is_err());
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().next().unwrap(), ",Mike,Mike");
    }
}
