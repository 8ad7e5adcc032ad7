//! Plot-summary corpora and the sample-selection filters.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gazetteer::{find_mentions, read_name_list, EntityKind, Gazetteer};
use crate::text::{self, PhraseMatcher};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSample {
    pub id: String,
    pub text: String,
    pub word_count: usize,
}

impl TextSample {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        let word_count = text::word_count(&text);
        if word_count == 0 {
            return Err(Error::InvalidInput(format!("sample {id} has no words")));
        }
        Ok(Self { id, text, word_count })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub samples: Vec<TextSample>,
    pub source_name: String,
}

impl Corpus {
    /// Builds a corpus, dropping samples whose id was already seen.
    pub fn new(source_name: impl Into<String>, samples: Vec<TextSample>) -> Self {
        let mut seen = HashSet::new();
        let samples = samples
            .into_iter()
            .filter(|s| {
                let fresh = seen.insert(s.id.clone());
                if !fresh {
                    tracing::warn!(id = %s.id, "duplicate sample id skipped");
                }
                fresh
            })
            .collect();
        Self { samples, source_name: source_name.into() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn retain(&self, mut keep: impl FnMut(&TextSample) -> bool) -> Corpus {
        Corpus {
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
            source_name: self.source_name.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// `id<TAB>text` per line.
    TsvIdText,
    /// `{"id": ..., "text": ...}` per line.
    Jsonl,
    /// One `.txt` file per sample; the file stem is the id.
    PlainDir,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" | "tsv-id-text" => Ok(Self::TsvIdText),
            "jsonl" => Ok(Self::Jsonl),
            "plain-dir" | "dir" => Ok(Self::PlainDir),
            other => Err(Error::Config(format!("unknown corpus format {other:?}"))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TsvIdText => "tsv-id-text",
            Self::Jsonl => "jsonl",
            Self::PlainDir => "plain-dir",
        })
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    #[serde(default)]
    id: Option<serde_json::Value>,
    text: String,
}

fn synth_id(row: usize) -> String {
    format!("row-{row}")
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let mut samples = Vec::new();
    let mut push = |id: String, text: String, where_: String| match TextSample::new(id, text) {
        Ok(s) => samples.push(s),
        Err(e) => tracing::warn!(record = %where_, "skipping record: {e}"),
    };

    match format {
        CorpusFormat::TsvIdText | CorpusFormat::Jsonl => {
            let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (n, line) in body.lines().enumerate() {
                let row = n + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let loc = format!("{}:{row}", path.display());
                if format == CorpusFormat::TsvIdText {
                    let Some((id, text)) = line.split_once('\t') else {
                        tracing::warn!(record = %loc, "skipping record: no tab separator");
                        continue;
                    };
                    let id = if id.trim().is_empty() { synth_id(row) } else { id.trim().to_string() };
                    push(id, text.to_string(), loc);
                } else {
                    match serde_json::from_str::<JsonRecord>(line) {
                        Ok(rec) => {
                            let id = match rec.id {
                                Some(serde_json::Value::String(s)) if !s.is_empty() => s,
                                Some(serde_json::Value::Number(n)) => n.to_string(),
                                _ => synth_id(row),
                            };
                            push(id, rec.text, loc);
                        }
                        Err(e) => tracing::warn!(record = %loc, "skipping record: {e}"),
                    }
                }
            }
        }
        CorpusFormat::PlainDir => {
            let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
            let mut files: Vec<_> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            files.sort();
            for f in files {
                let id = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                match fs::read_to_string(&f) {
                    Ok(text) => push(id, text, f.display().to_string()),
                    Err(e) => tracing::warn!(file = %f.display(), "skipping record: {e}"),
                }
            }
        }
    }

    if samples.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no usable records", path.display())));
    }
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("corpus").to_string();
    Ok(Corpus::new(name, samples))
}

/// Keep samples with strictly fewer than `max_words` words.
pub fn filter_word_count(corpus: &Corpus, max_words: usize) -> Result<Corpus> {
    if max_words == 0 {
        return Err(Error::InvalidInput("max_words must be positive".into()));
    }
    Ok(corpus.retain(|s| s.word_count < max_words))
}

/// Keywords whose presence disqualifies a sample (nationalities, cities...).
#[derive(Debug, Clone, Default)]
pub struct ExclusionLexicon {
    matcher: PhraseMatcher<()>,
}

impl ExclusionLexicon {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut matcher = PhraseMatcher::default();
        for e in entries {
            let e: String = e.into();
            let e = e.trim().to_string();
            if !e.is_empty() {
                matcher.insert(e, ());
            }
        }
        Self { matcher }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(read_name_list(path)?))
    }

    pub fn bundled() -> Self {
        Self::new(crate::gazetteer::parse_name_list(include_str!("../data/exclusion_lexicon.txt")))
    }

    pub fn extend<I, S>(&mut self, entries: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for e in entries {
            self.matcher.insert(e.into(), ());
        }
    }

    pub fn len(&self) -> usize {
        self.matcher.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matcher.is_empty()
    }

    pub fn mentioned_in(&self, text: &str) -> bool {
        !self.matcher.scan(text, |_| true).is_empty()
    }
}

pub fn filter_entity_profile(
    corpus: &Corpus,
    gazetteer: &Gazetteer,
    require_person: bool,
    require_country: bool,
    exclusion: &ExclusionLexicon,
) -> Corpus {
    corpus.retain(|s| {
        if exclusion.mentioned_in(&s.text) {
            return false;
        }
        let ms = find_mentions(&s.text, gazetteer, &[EntityKind::Person, EntityKind::Country]);
        let has = |k| ms.iter().any(|m| m.kind == k);
        (!require_person || has(EntityKind::Person)) && (!require_country || has(EntityKind::Country))
    })
}
