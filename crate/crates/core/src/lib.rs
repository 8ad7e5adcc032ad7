//! Measure how much a text-embedding model reacts to the names in a text, and
//! strip or mask those names before embedding.
//!
//! The pipeline: a [`Gazetteer`] finds person/country mentions, [`perturb`]
//! swaps them for random names K times, an [`embed::Embedder`] embeds every
//! variant, and [`metrics::bias_score`] averages the pairwise similarities.
//! [`bench`] wires this into the bias run and the two downstream tasks.

pub mod anonymize;
pub mod bench;
pub mod concurrency;
pub mod corpus;
pub mod embed;
pub mod embedding;
pub mod error;
pub mod gazetteer;
pub mod http;
pub mod metrics;
pub mod perturb;
pub mod scalar;
pub mod text;

pub use anonymize::{AnonymizationStrategy, Anonymizer, PromptId};
pub use corpus::{Corpus, CorpusFormat, TextSample};
pub use embed::{BackendKind, BackendSpec, Embedder, TextEmbedder};
pub use embedding::Embedding;
pub use error::{Error, Result};
pub use gazetteer::{EntityKind, EntityMention, Gazetteer};
pub use metrics::{BiasScore, ScoredPair, SimilarityKind};
pub use perturb::{PerturbationConfig, PerturbationMode, PerturbationSet};
pub use scalar::Scalar;

pub type Embedding64 = Embedding<f64>;
pub type Embedding32 = Embedding<f32>;
pub type BiasScore64 = BiasScore<f64>;
pub type BiasScore32 = BiasScore<f32>;
pub type ScoredPair64 = ScoredPair<f64>;
