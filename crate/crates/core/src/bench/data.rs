//! Task datasets: STS triplets and SummEval-shaped summary sets.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub id: String,
    pub query: String,
    pub positive: String,
    pub negative: String,
}

impl Triplet {
    pub fn validate(&self) -> Result<()> {
        for (field, text) in [("query", &self.query), ("positive", &self.positive), ("negative", &self.negative)] {
            if text.trim().is_empty() {
                return Err(Error::InvalidInput(format!("triplet {}: empty {field}", self.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineSummary {
    pub text: String,
    pub relevance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummSample {
    pub doc_id: String,
    pub machine_summaries: Vec<MachineSummary>,
    pub human_summaries: Vec<String>,
}

impl SummSample {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("document {}: {what}", self.doc_id)));
        if self.machine_summaries.is_empty() || self.human_summaries.is_empty() {
            return bad("needs at least one machine and one human summary");
        }
        if let Some(m) = self.machine_summaries.iter().find(|m| !(1.0..=5.0).contains(&m.relevance)) {
            return bad(&format!("relevance {} outside [1, 5]", m.relevance));
        }
        let empty_machine = self.machine_summaries.iter().any(|m| m.text.trim().is_empty());
        if empty_machine || self.human_summaries.iter().any(|h| h.trim().is_empty()) {
            return bad("empty summary text");
        }
        Ok(())
    }
}

fn parse_jsonl<T: DeserializeOwned>(body: &str, origin: &str) -> Result<Vec<T>> {
    body.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::InvalidInput(format!("{origin}:{}: {e}", n + 1))))
        .collect()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_triplets(body: &str, origin: &str) -> Result<Vec<Triplet>> {
    let ts: Vec<Triplet> = parse_jsonl(body, origin)?;
    if ts.is_empty() {
        return Err(Error::InvalidInput(format!("{origin}: no triplets")));
    }
    ts.iter().try_for_each(Triplet::validate)?;
    Ok(ts)
}

pub fn load_triplets(path: &Path) -> Result<Vec<Triplet>> {
    parse_triplets(&read(path)?, &path.display().to_string())
}

/// The ten bundled name-heavy paragraph triplets.
pub fn bundled_triplets() -> Vec<Triplet> {
    parse_triplets(include_str!("../../data/sts_triplets.jsonl"), "bundled triplets").expect("bundled triplets parse")
}

pub fn parse_summ(body: &str, origin: &str) -> Result<Vec<SummSample>> {
    let ss: Vec<SummSample> = parse_jsonl(body, origin)?;
    if ss.is_empty() {
        return Err(Error::InvalidInput(format!("{origin}: no documents")));
    }
    ss.iter().try_for_each(SummSample::validate)?;
    Ok(ss)
}

pub fn load_summ(path: &Path) -> Result<Vec<SummSample>> {
    parse_summ(&read(path)?, &path.display().to_string())
}

/// Three small synthetic documents in SummEval shape.
pub fn bundled_summ_fixture() -> Vec<SummSample> {
    parse_summ(include_str!("../../data/summ_fixture.jsonl"), "bundled summ fixture").expect("bundled fixture parses")
}
