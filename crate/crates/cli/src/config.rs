//! Run configuration: a JSON file merged with command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use namebias::bench::ReportFormat;
use namebias::gazetteer::read_name_list;
use namebias::metrics::StandardErrorMode;
use namebias::{BackendKind, BackendSpec, EntityKind, Gazetteer, PerturbationConfig, PerturbationMode, SimilarityKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{
    BackendArg, CorpusArgs, FormatArg, GazetteerArgs, GlobalArgs, MetricArg, ModeArg, PerturbArgs, SeModeArg,
    StrategyArgs,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GazetteerPaths {
    pub persons: Option<PathBuf>,
    pub countries: Option<PathBuf>,
    pub per_country_dir: Option<PathBuf>,
    pub cities: Option<PathBuf>,
    pub organizations: Option<PathBuf>,
}

impl GazetteerPaths {
    pub(crate) fn merge(&mut self, a: &GazetteerArgs) {
        let pick = |flag: &Option<PathBuf>, slot: &mut Option<PathBuf>| {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        };
        pick(&a.persons, &mut self.persons);
        pick(&a.countries, &mut self.countries);
        pick(&a.per_country_dir, &mut self.per_country_dir);
        pick(&a.cities, &mut self.cities);
        pick(&a.organizations, &mut self.organizations);
    }

    /// Bundled pools, with any configured file taking the place of its pool.
    pub fn load(&self) -> anyhow::Result<Gazetteer> {
        let bundled = Gazetteer::bundled();
        let list = |p: &Option<PathBuf>, kind: EntityKind| -> anyhow::Result<Vec<String>> {
            Ok(match p {
                Some(p) => read_name_list(p)?,
                None => bundled.pool(kind).to_vec(),
            })
        };
        let mut b = Gazetteer::builder()
            .persons(list(&self.persons, EntityKind::Person)?)
            .countries(list(&self.countries, EntityKind::Country)?)
            .cities(list(&self.cities, EntityKind::CityOrRegion)?)
            .organizations(list(&self.organizations, EntityKind::Organization)?);
        match &self.per_country_dir {
            Some(dir) => {
                let mut files: Vec<PathBuf> = fs::read_dir(dir)
                    .with_context(|| format!("reading per-country dir {}", dir.display()))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                    .collect();
                files.sort();
                for f in files {
                    let Some(country) = f.file_stem().and_then(|s| s.to_str()) else { continue };
                    b = b.per_country(country, read_name_list(&f)?);
                }
            }
            None => {
                for c in bundled.per_country_keys() {
                    b = b.per_country(c, bundled.per_country_person_names(c).unwrap_or_default().to_vec());
                }
            }
        }
        Ok(b.build()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendSpec,
    pub perturbation: PerturbationConfig,
    pub strategy: Option<String>,
    pub anon_endpoint: Option<String>,
    pub gazetteer: GazetteerPaths,
    pub dataset: Option<PathBuf>,
    pub dataset_format: Option<String>,
    pub max_words: Option<usize>,
    pub require_person: bool,
    pub require_country: bool,
    pub exclusion_lexicon: Option<PathBuf>,
    pub similarity: SimilarityKind,
    pub standard_error: StandardErrorMode,
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
    pub max_in_flight: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendSpec::default(),
            perturbation: PerturbationConfig::default(),
            strategy: None,
            anon_endpoint: None,
            gazetteer: GazetteerPaths::default(),
            dataset: None,
            dataset_format: None,
            max_words: None,
            require_person: false,
            require_country: false,
            exclusion_lexicon: None,
            similarity: SimilarityKind::Cosine,
            standard_error: StandardErrorMode::PooledPairs,
            out: None,
            format: ReportFormat::Json,
            max_in_flight: 4,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let body = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&body).with_context(|| format!("parsing config {}", path.display()))
    }

    pub(crate) fn apply_global(&mut self, g: &GlobalArgs) -> anyhow::Result<()> {
        if let Some(seed) = g.seed {
            self.perturbation.seed = seed;
        }
        if let Some(b) = g.backend {
            let kind = match b {
                BackendArg::Remote => BackendKind::RemoteHttp,
                BackendArg::Hash => BackendKind::HashDeterministic,
                BackendArg::Bow => BackendKind::BagOfWords,
            };
            if kind != self.backend.kind {
                self.backend.kind = kind;
                self.backend.model_id = match kind {
                    BackendKind::RemoteHttp => String::new(),
                    BackendKind::HashDeterministic => "sha256".into(),
                    BackendKind::BagOfWords => "bow".into(),
                };
                if kind != BackendKind::HashDeterministic {
                    self.backend.dim = None;
                }
            }
        }
        if let Some(m) = &g.model {
            self.backend.model_id.clone_from(m);
        }
        if let Some(e) = &g.endpoint {
            self.backend.endpoint = Some(e.clone());
        }
        if let Some(d) = g.dim {
            self.backend.dim = Some(d);
        }
        if let Some(v) = &g.vocab {
            self.backend.vocabulary = Some(read_name_list(v)?);
        }
        if let Some(c) = &g.cache_dir {
            self.backend.cache_dir = Some(c.clone());
        }
        if let Some(o) = &g.out {
            self.out = Some(o.clone());
        }
        if let Some(f) = g.format {
            self.format = match f {
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Csv => ReportFormat::Csv,
            };
        }
        if let Some(n) = g.max_in_flight {
            if n == 0 {
                bail!("--max-in-flight must be at least 1");
            }
            self.max_in_flight = n;
        }
        self.backend.max_in_flight = self.max_in_flight;
        if self.backend.kind == BackendKind::HashDeterministic && self.backend.dim.is_none() {
            self.backend.dim = Some(64);
        }
        Ok(())
    }

    pub(crate) fn apply_corpus(&mut self, c: &CorpusArgs) {
        if let Some(d) = &c.dataset {
            self.dataset = Some(d.clone());
        }
        if let Some(f) = &c.input_format {
            self.dataset_format = Some(f.clone());
        }
        if let Some(m) = c.max_words {
            self.max_words = Some(m);
        }
        self.require_person |= c.require_person;
        self.require_country |= c.require_country;
        if let Some(e) = &c.exclusion_lexicon {
            self.exclusion_lexicon = Some(e.clone());
        }
    }

    pub(crate) fn apply_perturb(&mut self, p: &PerturbArgs) -> anyhow::Result<()> {
        if let Some(k) = p.k {
            self.perturbation.k = k;
        }
        let country = p.country.clone().or_else(|| match &self.perturbation.mode {
            PerturbationMode::PersonOnlySameCountry { country } => Some(country.clone()),
            _ => None,
        });
        if let Some(m) = p.mode {
            self.perturbation.mode = match m {
                ModeArg::PersonAndCountry => PerturbationMode::PersonAndCountry,
                ModeArg::PersonOnly => PerturbationMode::PersonOnly,
                ModeArg::PersonOnlySameCountry => PerturbationMode::PersonOnlySameCountry {
                    country: country.context("--mode person-only-same-country needs --country")?,
                },
            };
        } else if let (Some(c), PerturbationMode::PersonOnlySameCountry { country }) =
            (&p.country, &mut self.perturbation.mode)
        {
            country.clone_from(c);
        }
        Ok(())
    }

    pub(crate) fn apply_strategy(&mut self, s: &StrategyArgs) {
        if let Some(v) = &s.strategy {
            self.strategy = Some(v.clone());
        }
        if let Some(e) = &s.anon_endpoint {
            self.anon_endpoint = Some(e.clone());
        }
    }

    pub(crate) fn apply_measure(&mut self, metric: Option<MetricArg>, se: Option<SeModeArg>) {
        if let Some(m) = metric {
            self.similarity = match m {
                MetricArg::Cosine => SimilarityKind::Cosine,
                MetricArg::Euclidean => SimilarityKind::Euclidean,
            };
        }
        if let Some(s) = se {
            self.standard_error = match s {
                SeModeArg::Pooled => StandardErrorMode::PooledPairs,
                SeModeArg::PerSample => StandardErrorMode::PerSampleMeans,
            };
        }
    }

    /// Dotted `config.*` keys for report metadata.
    pub fn flatten(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        flatten_into("config", &serde_json::to_value(self).unwrap_or(Value::Null), &mut out);
        out
    }
}

fn flatten_into(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten_into(&format!("{prefix}.{k}"), v, out);
            }
        }
        Value::Null => {}
        Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}
