use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "namebias", version, about = "Measure and mitigate name bias in text embeddings")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    /// HTTP embedding service (key from EMBED_API_KEY)
    Remote,
    /// SHA-256 derived vectors, offline
    Hash,
    /// Bag-of-words counts, offline
    Bow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Cosine,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeModeArg {
    /// Over every pair similarity
    Pooled,
    /// Over the per-sample means
    PerSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[allow(clippy::enum_variant_names)]
pub enum ModeArg {
    PersonAndCountry,
    PersonOnly,
    PersonOnlySameCountry,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,

    /// Model identifier sent to the remote backend
    #[arg(long, global = true)]
    pub model: Option<String>,

    /// Embedding service URL
    #[arg(long, global = true, value_name = "URL")]
    pub endpoint: Option<String>,

    /// Vector size of the hash backend
    #[arg(long, global = true)]
    pub dim: Option<usize>,

    /// Vocabulary file (one entry per line) for the bow backend
    #[arg(long, global = true, value_name = "PATH")]
    pub vocab: Option<PathBuf>,

    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,

    /// Where to write the report (standard output when absent)
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Report format
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,

    /// Upper bound on concurrent samples and remote requests
    #[arg(long, global = true)]
    pub max_in_flight: Option<usize>,

    /// Repeat for more logging (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Args, Default)]
pub struct GazetteerArgs {
    /// Person names file, one per line
    #[arg(long, value_name = "PATH")]
    pub persons: Option<PathBuf>,

    /// Country names file, one per line
    #[arg(long, value_name = "PATH")]
    pub countries: Option<PathBuf>,

    /// Directory of <Country>.txt person-name files
    #[arg(long, value_name = "DIR")]
    pub per_country_dir: Option<PathBuf>,

    #[arg(long, value_name = "PATH")]
    pub cities: Option<PathBuf>,

    #[arg(long, value_name = "PATH")]
    pub organizations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus file or directory
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,

    /// tsv, jsonl or plain-dir (guessed from the path when absent)
    #[arg(long, value_name = "FORMAT")]
    pub input_format: Option<String>,

    /// Keep samples with fewer words than this
    #[arg(long)]
    pub max_words: Option<usize>,

    /// Keep only samples mentioning a person
    #[arg(long)]
    pub require_person: bool,

    /// Keep only samples mentioning a country
    #[arg(long)]
    pub require_country: bool,

    /// Drop samples mentioning any of these keywords (one per line)
    #[arg(long, value_name = "PATH")]
    pub exclusion_lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// Variants per sample
    #[arg(long)]
    pub k: Option<usize>,

    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,

    /// Country whose name pool feeds person-only-same-country
    #[arg(long)]
    pub country: Option<String>,
}

#[derive(Debug, Args)]
pub struct StrategyArgs {
    /// none, remove, replace, remote-llm or remote-llm:<prompt-id>
    #[arg(long)]
    pub strategy: Option<String>,

    /// Text generation service for remote-llm (key from ANON_API_KEY)
    #[arg(long, value_name = "URL")]
    pub anon_endpoint: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write K name-perturbed variants of every sample as JSONL
    Perturb {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        perturb: PerturbArgs,
        #[command(flatten)]
        gazetteer: GazetteerArgs,
    },
    /// Bias score of the configured backend over a corpus
    Measure {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        perturb: PerturbArgs,
        #[command(flatten)]
        gazetteer: GazetteerArgs,
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        #[arg(long, value_enum)]
        se_mode: Option<SeModeArg>,
    },
    /// Triplet similarity task (AUC-ROC)
    Sts {
        /// Triplet JSONL (bundled set when absent)
        #[arg(long, value_name = "PATH")]
        triplets: Option<PathBuf>,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[command(flatten)]
        gazetteer: GazetteerArgs,
    },
    /// Summary relevance task (Spearman / Pearson)
    Summ {
        /// SummEval-shaped JSONL (bundled fixture when absent)
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[command(flatten)]
        gazetteer: GazetteerArgs,
    },
    /// Anonymize a text file or standard input
    Anonymize {
        /// Input file (standard input when absent)
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[command(flatten)]
        gazetteer: GazetteerArgs,
    },
    /// Similarity matrix of one template filled with different names
    Heatmap {
        /// Text containing CHARACTER_NAME exactly once
        #[arg(long, value_name = "PATH")]
        template: PathBuf,
        /// Names file, one per line
        #[arg(long, value_name = "PATH")]
        names: PathBuf,
    },
}
