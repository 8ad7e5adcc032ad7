//! The `namebias` command line.
//!
//! [`run`] takes explicit streams and returns the exit code so the whole
//! surface can be driven in-process: 0 on success, 1 on a failed run, 2 on a
//! usage error.

mod args;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{IsTerminal, Read, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{CommandFactory, Parser};
use namebias::anonymize::HttpTextGenerator;
use namebias::bench::{self, BiasOptions, TaskReport};
use namebias::concurrency::bounded_map;
use namebias::corpus::{filter_entity_profile, filter_word_count, load_corpus, ExclusionLexicon};
use namebias::embed::vocabulary_from_texts;
use namebias::gazetteer::read_name_list;
use namebias::http::RetryPolicy;
use namebias::perturb::generate_perturbations;
use namebias::{
    AnonymizationStrategy, Anonymizer, BackendKind, Corpus, CorpusFormat, Embedder, EntityKind, Gazetteer,
    PerturbationMode,
};

pub use args::Cli;
pub use config::{GazetteerPaths, RunConfig};

use args::Command;

#[derive(Debug)]
struct UsageError {
    message: String,
    subcommand: &'static str,
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for UsageError {}

fn usage(subcommand: &'static str, message: impl Into<String>) -> anyhow::Error {
    UsageError { message: message.into(), subcommand }.into()
}

fn usage_text(subcommand: &str) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    match cmd.find_subcommand_mut(subcommand) {
        Some(sub) => sub.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .try_init();
}

pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    init_logging(cli.global.verbose);
    match dispatch(cli, stdin, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => match e.downcast_ref::<UsageError>() {
            Some(u) => {
                let _ = writeln!(stderr, "error: {u}\n\n{}", usage_text(u.subcommand));
                2
            }
            None => {
                let _ = writeln!(stderr, "error: {e:#}");
                1
            }
        },
    }
}

struct Ctx<'a> {
    cfg: RunConfig,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn announce(&mut self) -> anyhow::Result<()> {
        writeln!(self.stderr, "effective config: {}", serde_json::to_string(&self.cfg)?)?;
        Ok(())
    }

    fn finish(&mut self, mut report: TaskReport, summary: String) -> anyhow::Result<()> {
        report.metadata.extend(self.cfg.flatten());
        report.meta("max_in_flight", self.cfg.max_in_flight);
        writeln!(self.stderr, "{summary}")?;
        match &self.cfg.out {
            Some(path) => {
                bench::write_report(&report, path, self.cfg.format)?;
                writeln!(self.stderr, "report written to {}", path.display())?;
            }
            None => self.stdout.write_all(bench::render_report(&report, self.cfg.format)?.as_bytes())?,
        }
        Ok(())
    }

    fn write_output(&mut self, body: &[u8]) -> anyhow::Result<()> {
        match &self.cfg.out {
            Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display()))?,
            None => self.stdout.write_all(body)?,
        }
        Ok(())
    }

    fn anonymizer<'g>(&self, g: &'g Gazetteer, default: &str) -> anyhow::Result<Anonymizer<'g>> {
        let label = self.cfg.strategy.as_deref().unwrap_or(default);
        let strategy: AnonymizationStrategy = label.parse()?;
        let mut a = Anonymizer::new(strategy, g).with_max_in_flight(self.cfg.max_in_flight);
        if let AnonymizationStrategy::RemoteLlm { .. } = strategy {
            let endpoint =
                self.cfg.anon_endpoint.as_deref().ok_or_else(|| anyhow!("strategy {label} needs --anon-endpoint"))?;
            a = a.with_client(Arc::new(HttpTextGenerator::from_env(endpoint, RetryPolicy::default())));
        }
        Ok(a)
    }

    /// Embedder for the configured backend; a missing bag-of-words
    /// vocabulary is derived from `texts`.
    fn embedder<S: AsRef<str>>(&self, texts: impl FnOnce() -> Vec<S>) -> anyhow::Result<Embedder> {
        let mut spec = self.cfg.backend.clone();
        if spec.kind == BackendKind::BagOfWords && spec.vocabulary.is_none() {
            let vocab = vocabulary_from_texts(texts());
            spec.dim = Some(vocab.len());
            spec.vocabulary = Some(vocab);
        }
        Ok(Embedder::new(spec)?)
    }

    fn corpus(&mut self, g: &Gazetteer, subcommand: &'static str) -> anyhow::Result<Corpus> {
        let path =
            self.cfg.dataset.clone().ok_or_else(|| usage(subcommand, "--dataset is required (flag or config file)"))?;
        let format = match &self.cfg.dataset_format {
            Some(f) => f.parse()?,
            None => guess_format(&path)?,
        };
        let mut corpus = load_corpus(&path, format)?;
        let loaded = corpus.len();
        if let Some(max) = self.cfg.max_words {
            corpus = filter_word_count(&corpus, max)?;
        }
        if self.cfg.require_person || self.cfg.require_country || self.cfg.exclusion_lexicon.is_some() {
            let lexicon = match &self.cfg.exclusion_lexicon {
                Some(p) => ExclusionLexicon::load(p)?,
                None => ExclusionLexicon::default(),
            };
            corpus = filter_entity_profile(&corpus, g, self.cfg.require_person, self.cfg.require_country, &lexicon);
        }
        writeln!(self.stderr, "{}: {loaded} samples loaded, {} kept", path.display(), corpus.len())?;
        if corpus.is_empty() {
            return Err(anyhow!("no samples left after filtering"));
        }
        Ok(corpus)
    }
}

fn guess_format(path: &Path) -> anyhow::Result<CorpusFormat> {
    if path.is_dir() {
        return Ok(CorpusFormat::PlainDir);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("txt") => Ok(CorpusFormat::TsvIdText),
        Some("jsonl") | Some("json") => Ok(CorpusFormat::Jsonl),
        _ => Err(anyhow!("cannot tell the format of {}; pass --input-format", path.display())),
    }
}

fn dispatch(cli: Cli, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_global(&cli.global)?;
    let mut ctx = Ctx { cfg, stdout, stderr };

    match cli.command {
        Command::Perturb { corpus, perturb, gazetteer } => {
            ctx.cfg.apply_corpus(&corpus);
            ctx.cfg.apply_perturb(&perturb)?;
            ctx.cfg.gazetteer.merge(&gazetteer);
            ctx.announce()?;
            let g = ctx.cfg.gazetteer.load()?;
            let corpus = ctx.corpus(&g, "perturb")?;
            let pconfig = ctx.cfg.perturbation.clone();
            pconfig.validate(&g)?;
            let sets =
                bounded_map(&corpus.samples, ctx.cfg.max_in_flight, |_, s| generate_perturbations(s, &pconfig, &g));
            let mut out = Vec::new();
            let mut skipped = 0;
            for set in sets {
                match set {
                    Ok(set) => set.write_jsonl(&mut out)?,
                    Err(e) => {
                        skipped += 1;
                        writeln!(ctx.stderr, "skipping: {e}")?;
                    }
                }
            }
            if skipped == corpus.len() {
                return Err(namebias::Error::AllSkipped { skipped }.into());
            }
            ctx.write_output(&out)
        }
        Command::Measure { corpus, perturb, gazetteer, metric, se_mode } => {
            ctx.cfg.apply_corpus(&corpus);
            ctx.cfg.apply_perturb(&perturb)?;
            ctx.cfg.gazetteer.merge(&gazetteer);
            ctx.cfg.apply_measure(metric, se_mode);
            ctx.announce()?;
            let g = ctx.cfg.gazetteer.load()?;
            let corpus = ctx.corpus(&g, "measure")?;
            let embedder = ctx.embedder(|| {
                // every word a variant can contain
                let mut texts: Vec<&str> = corpus.samples.iter().map(|s| s.text.as_str()).collect();
                texts.extend(g.pool(EntityKind::Person).iter().map(String::as_str));
                texts.extend(g.pool(EntityKind::Country).iter().map(String::as_str));
                if let PerturbationMode::PersonOnlySameCountry { country } = &ctx.cfg.perturbation.mode {
                    texts.extend(g.per_country_person_names(country).unwrap_or_default().iter().map(String::as_str));
                }
                texts
            })?;
            let options = BiasOptions {
                similarity: ctx.cfg.similarity,
                standard_error: ctx.cfg.standard_error,
                max_in_flight: ctx.cfg.max_in_flight,
            };
            let report = bench::run_bias(&corpus, &ctx.cfg.perturbation, &g, &embedder, &options)?;
            let m = |k: &str| report.metric(k).unwrap_or(f64::NAN);
            let summary = format!(
                "bias mean {:.6} ± {:.6} (N={}, K={}, pairs={}, skipped={})",
                m("mean"),
                m("standard_error"),
                m("sample_count"),
                m("k"),
                m("pair_count"),
                m("skipped")
            );
            ctx.finish(report, summary)
        }
        Command::Sts { triplets, strategy, gazetteer } => {
            ctx.cfg.apply_strategy(&strategy);
            ctx.cfg.gazetteer.merge(&gazetteer);
            if triplets.is_some() {
                ctx.cfg.dataset = triplets;
            }
            ctx.announce()?;
            let g = ctx.cfg.gazetteer.load()?;
            let data = match &ctx.cfg.dataset {
                Some(p) => bench::load_triplets(p)?,
                None => bench::bundled_triplets(),
            };
            let anonymizer = ctx.anonymizer(&g, "none")?;
            let embedder = ctx.embedder(|| bench::sts_vocabulary(&data))?;
            let mut report = bench::run_sts(&data, &embedder, &anonymizer)?;
            report.meta("dataset", ctx.cfg.dataset.as_ref().map_or("bundled".into(), |p| p.display().to_string()));
            let summary = format!(
                "AUC-ROC {:.4} over {} triplets ({})",
                report.metric("auc_roc").unwrap_or(f64::NAN),
                data.len(),
                report.anonymization
            );
            ctx.finish(report, summary)
        }
        Command::Summ { dataset, strategy, gazetteer } => {
            ctx.cfg.apply_strategy(&strategy);
            ctx.cfg.gazetteer.merge(&gazetteer);
            if dataset.is_some() {
                ctx.cfg.dataset = dataset;
            }
            ctx.announce()?;
            let g = ctx.cfg.gazetteer.load()?;
            let data = match &ctx.cfg.dataset {
                Some(p) => bench::load_summ(p)?,
                None => bench::bundled_summ_fixture(),
            };
            let anonymizer = ctx.anonymizer(&g, "none")?;
            let embedder = ctx.embedder(|| {
                data.iter()
                    .flat_map(|d| {
                        d.machine_summaries
                            .iter()
                            .map(|m| m.text.as_str())
                            .chain(d.human_summaries.iter().map(String::as_str))
                    })
                    .collect()
            })?;
            let mut report = bench::run_summ(&data, &embedder, &anonymizer)?;
            report.meta("dataset", ctx.cfg.dataset.as_ref().map_or("bundled".into(), |p| p.display().to_string()));
            let summary = format!(
                "spearman {:.4}, pearson {:.4} over {} machine summaries",
                report.metric("spearman").unwrap_or(f64::NAN),
                report.metric("pearson").unwrap_or(f64::NAN),
                report.metric("scores").unwrap_or(f64::NAN)
            );
            ctx.finish(report, summary)
        }
        Command::Anonymize { input, strategy, gazetteer } => {
            ctx.cfg.apply_strategy(&strategy);
            ctx.cfg.gazetteer.merge(&gazetteer);
            ctx.announce()?;
            let g = ctx.cfg.gazetteer.load()?;
            let text = match &input {
                Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
                None => {
                    let mut s = String::new();
                    stdin.read_to_string(&mut s).context("reading standard input")?;
                    s
                }
            };
            let anonymizer = ctx.anonymizer(&g, "remove")?;
            let id = input.as_ref().map_or("stdin".into(), |p| p.display().to_string());
            let out = anonymizer.apply(&id, &text)?;
            ctx.write_output(out.as_bytes())
        }
        Command::Heatmap { template, names } => {
            ctx.announce()?;
            let template_text = fs::read_to_string(&template)
                .with_context(|| format!("reading {}", template.display()))?
                .trim_end()
                .to_string();
            let names = read_name_list(&names)?;
            let embedder = ctx.embedder(|| {
                let mut t = vec![template_text.clone()];
                t.extend(names.iter().cloned());
                t
            })?;
            let heatmap = bench::export_heatmap(&template_text, &names, &embedder)?;
            let mut buf = Vec::new();
            heatmap.write_csv(&mut buf)?;
            ctx.write_output(&buf)
        }
    }
}
