//! Name-perturbed variants of a text.
//!
//! Each distinct person (and, depending on the mode, country) name in a text
//! is mapped to a different name drawn from a pool, and every occurrence of
//! the source name receives that replacement. Within one variant draws are
//! without replacement and never return the source name itself; variants are
//! drawn independently of one another.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::TextSample;
use crate::error::{Error, Result};
use crate::gazetteer::{distinct_keys, find_mentions, EntityKind, EntityMention, Gazetteer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum PerturbationMode {
    PersonAndCountry,
    PersonOnly,
    /// Person names only, replacements drawn from one country's pool.
    PersonOnlySameCountry {
        country: String,
    },
}

impl PerturbationMode {
    /// Entity kinds whose mentions are replaced.
    pub fn perturbed_kinds(&self) -> &'static [EntityKind] {
        match self {
            PerturbationMode::PersonAndCountry => &[EntityKind::Person, EntityKind::Country],
            _ => &[EntityKind::Person],
        }
    }

    fn pool<'g>(&self, gazetteer: &'g Gazetteer, kind: EntityKind) -> Result<&'g [String]> {
        match (self, kind) {
            (PerturbationMode::PersonOnlySameCountry { country }, EntityKind::Person) => gazetteer
                .per_country_person_names(country)
                .ok_or_else(|| Error::Config(format!("no per-country person pool for {country}"))),
            _ => Ok(gazetteer.pool(kind)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationConfig {
    pub k: usize,
    pub mode: PerturbationMode,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self { k: 20, mode: PerturbationMode::PersonAndCountry, seed: 0 }
    }
}

impl PerturbationConfig {
    pub fn validate(&self, gazetteer: &Gazetteer) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("K must be at least 2, got {}", self.k)));
        }
        if let PerturbationMode::PersonOnlySameCountry { country } = &self.mode {
            if gazetteer.per_country_person_names(country).is_none() {
                let known: Vec<_> = gazetteer.per_country_keys().collect();
                return Err(Error::Config(format!("no per-country person pool for {country} (available: {known:?})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameMapping {
    pub person_map: BTreeMap<String, String>,
    pub country_map: BTreeMap<String, String>,
}

impl NameMapping {
    pub fn is_empty(&self) -> bool {
        self.person_map.is_empty() && self.country_map.is_empty()
    }

    pub fn get(&self, kind: EntityKind, key: &str) -> Option<&str> {
        let map = match kind {
            EntityKind::Person => &self.person_map,
            EntityKind::Country => &self.country_map,
            _ => return None,
        };
        map.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub text: String,
    pub mapping: NameMapping,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSet {
    pub sample_id: String,
    pub variants: Vec<Variant>,
}

/// One line of the perturbation JSONL output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub sample_id: String,
    pub variant_index: usize,
    pub text: String,
    pub person_map: BTreeMap<String, String>,
    pub country_map: BTreeMap<String, String>,
}

impl PerturbationSet {
    pub fn records(&self) -> impl Iterator<Item = VariantRecord> + '_ {
        self.variants.iter().enumerate().map(|(i, v)| VariantRecord {
            sample_id: self.sample_id.clone(),
            variant_index: i,
            text: v.text.clone(),
            person_map: v.mapping.person_map.clone(),
            country_map: v.mapping.country_map.clone(),
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
        }
        Ok(())
    }

    pub fn texts(&self) -> Vec<&str> {
        self.variants.iter().map(|v| v.text.as_str()).collect()
    }
}

/// Produce one perturbed text from `text` and its `mentions`.
///
/// Mentions of kinds the mode does not perturb are left untouched.
pub fn perturb_once<R: Rng + ?Sized>(
    text: &str,
    mentions: &[EntityMention],
    gazetteer: &Gazetteer,
    mode: &PerturbationMode,
    rng: &mut R,
) -> Result<(String, NameMapping)> {
    let mut mapping = NameMapping::default();
    for &kind in mode.perturbed_kinds() {
        let keys = distinct_keys(mentions, kind);
        if keys.is_empty() {
            continue;
        }
        let pool = mode.pool(gazetteer, kind)?;
        if keys.len() >= pool.len() {
            return Err(Error::PoolExhausted { kind, distinct: keys.len(), pool: pool.len() });
        }
        let map = match kind {
            EntityKind::Person => &mut mapping.person_map,
            _ => &mut mapping.country_map,
        };
        let mut used: HashSet<&str> = HashSet::new();
        for key in keys {
            let candidates: Vec<&str> =
                pool.iter().map(String::as_str).filter(|c| *c != key && !used.contains(c)).collect();
            // non-empty: at most keys.len() - 1 used plus the key itself
            let pick = candidates[rng.random_range(0..candidates.len())];
            used.insert(pick);
            map.insert(key, pick.to_string());
        }
    }

    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for m in mentions {
        if let Some(rep) = mapping.get(m.kind, &m.canonical_key) {
            out.push_str(&text[cursor..m.span.start]);
            out.push_str(rep);
            cursor = m.span.end;
        }
    }
    out.push_str(&text[cursor..]);
    Ok((out, mapping))
}

/// Generator for variant `index` of `sample_id`; a pure function of its inputs.
pub fn variant_rng(seed: u64, sample_id: &str, index: usize) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"namebias/perturb/v1");
    h.update(seed.to_le_bytes());
    h.update((sample_id.len() as u64).to_le_bytes());
    h.update(sample_id.as_bytes());
    h.update((index as u64).to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha20Rng::from_seed(key)
}

pub fn generate_perturbations(
    sample: &TextSample,
    config: &PerturbationConfig,
    gazetteer: &Gazetteer,
) -> Result<PerturbationSet> {
    config.validate(gazetteer)?;
    let mentions = find_mentions(&sample.text, gazetteer, config.mode.perturbed_kinds());
    let variants = (0..config.k)
        .map(|i| {
            let mut rng = variant_rng(config.seed, &sample.id, i);
            perturb_once(&sample.text, &mentions, gazetteer, &config.mode, &mut rng)
                .map(|(text, mapping)| Variant { text, mapping })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.for_sample(&sample.id))?;
    Ok(PerturbationSet { sample_id: sample.id.clone(), variants })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOTTERY: &str = "Mike has been living in Belgium for five years and made a fortune by winning a lottery. Mike spent most of his money on treatment of his brother Donald who was suffering from Lung Cancer.";
    const LOTTERY_PERTURBED: &str = "Dwayne has been living in France for five years and made a fortune by winning a lottery. Dwayne spent most of his money on treatment of his brother Shawn who was suffering from Lung Cancer.";

    /// Pools where the only legal draws reproduce the published example.
    fn forced() -> Gazetteer {
        Gazetteer::builder()
            .persons(["Mike", "Donald", "Dwayne", "Shawn"])
            .countries(["Belgium", "France"])
            .build()
            .unwrap()
    }

    #[test]
    fn reproduces_lottery_example() {
        let g = forced();
        let ms = find_mentions(LOTTERY, &g, &[EntityKind::Person, EntityKind::Country]);
        let mode = PerturbationMode::PersonAndCountry;
        // Mike may take Donald/Dwayne/Shawn; try seeds until the first draw is Dwayne.
        let (text, map) = (0..200u64)
            .map(|s| perturb_once(LOTTERY, &ms, &g, &mode, &mut variant_rng(s, "t", 0)).unwrap())
            .find(|(_, m)| m.person_map["Mike"] == "Dwayne" && m.person_map["Donald"] == "Shawn")
            .expect("some seed yields the published mapping");
        assert_eq!(map.country_map["Belgium"], "France");
        assert_eq!(text, LOTTERY_PERTURBED);
    }

    #[test]
    fn identity_without_mentions() {
        let g = Gazetteer::bundled();
        let mut rng = variant_rng(1, "x", 0);
        let (t, m) = perturb_once("The sky is blue.", &[], &g, &PerturbationMode::PersonAndCountry, &mut rng).unwrap();
        assert_eq!(t, "The sky is blue.");
        assert!(m.is_empty());
    }

    #[test]
    fn repeated_name_gets_one_replacement() {
        let g = Gazetteer::builder().persons(["Ann", "Bea", "Cy"]).countries(["France"]).build().unwrap();
        let ms = find_mentions("Ann met Ann.", &g, &[EntityKind::Person]);
        for seed in 0..20 {
            let (t, m) =
                perturb_once("Ann met Ann.", &ms, &g, &PerturbationMode::PersonOnly, &mut variant_rng(seed, "a", 0))
                    .unwrap();
            let rep = &m.person_map["Ann"];
            assert_ne!(rep, "Ann");
            assert_eq!(t.matches(rep.as_str()).count(), 2);
            assert_eq!(t, format!("{rep} met {rep}."));
        }
    }

    #[test]
    fn pool_exhaustion_names_kind_and_sample() {
        let g = Gazetteer::builder().persons(["Ann", "Bea"]).countries(["France"]).build().unwrap();
        let s = TextSample::new("doc-7", "Ann and Bea").unwrap();
        let cfg = PerturbationConfig { k: 2, mode: PerturbationMode::PersonOnly, seed: 0 };
        let err = generate_perturbations(&s, &cfg, &g).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("doc-7") && msg.contains("person"), "{msg}");
    }

    #[test]
    fn person_only_leaves_countries() {
        let g = Gazetteer::bundled();
        let s = TextSample::new("t1", LOTTERY).unwrap();
        let cfg = PerturbationConfig { k: 5, mode: PerturbationMode::PersonOnly, seed: 3 };
        let set = generate_perturbations(&s, &cfg, &g).unwrap();
        for v in &set.variants {
            assert!(v.text.contains("Belgium"));
            assert!(v.mapping.country_map.is_empty());
        }
    }

    #[test]
    fn same_country_pool() {
        let g = Gazetteer::bundled();
        let india = g.per_country_person_names("India").unwrap();
        let s = TextSample::new("t1", LOTTERY).unwrap();
        let cfg = PerturbationConfig {
            k: 10,
            mode: PerturbationMode::PersonOnlySameCountry { country: "India".into() },
            seed: 11,
        };
        let set = generate_perturbations(&s, &cfg, &g).unwrap();
        for v in &set.variants {
            assert!(v.mapping.person_map.values().all(|n| india.contains(n)));
        }
        let bad =
            PerturbationConfig { mode: PerturbationMode::PersonOnlySameCountry { country: "Atlantis".into() }, ..cfg };
        assert!(matches!(bad.validate(&g), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_and_diverse() {
        let g = Gazetteer::bundled();
        let s = TextSample::new("t1", LOTTERY).unwrap();
        let cfg = PerturbationConfig { k: 20, mode: PerturbationMode::PersonAndCountry, seed: 7 };
        let a = generate_perturbations(&s, &cfg, &g).unwrap();
        let b = generate_perturbations(&s, &cfg, &g).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.variants.len(), 20);
        let distinct: HashSet<_> = a.variants.iter().map(|v| v.mapping.person_map.clone()).collect();
        assert!(distinct.len() >= 2);
    }

    #[test]
    fn k_below_two_rejected() {
        let g = Gazetteer::bundled();
        let cfg = PerturbationConfig { k: 1, ..Default::default() };
        assert!(cfg.validate(&g).is_err());
    }

    #[test]
    fn entity_free_variants_identical() {
        let g = Gazetteer::bundled();
        let s = TextSample::new("e", "The sky is blue.").unwrap();
        let cfg = PerturbationConfig { k: 2, ..Default::default() };
        let set = generate_perturbations(&s, &cfg, &g).unwrap();
        assert!(set.variants.iter().all(|v| v.text == s.text));
    }

    #[test]
    fn jsonl_records() {
        let g = Gazetteer::bundled();
        let s = TextSample::new("t1", LOTTERY).unwrap();
        let cfg = PerturbationConfig { k: 3, ..Default::default() };
        let set = generate_perturbations(&s, &cfg, &g).unwrap();
        let mut buf = Vec::new();
        set.write_jsonl(&mut buf).unwrap();
        let lines: Vec<VariantRecord> =
            String::from_utf8(buf).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2].variant_index, 2);
        assert_eq!(lines[1].text, set.variants[1].text);
    }
}
