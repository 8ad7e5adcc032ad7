//! Name lexicons and deterministic mention detection.
//!
//! Matching is exact and case-sensitive on word boundaries, scanning left to
//! right with longest-match-wins. A trailing possessive (`'s` or `’s`) is kept
//! out of the mention span but recorded so removal can drop it too.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::PhraseMatcher;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntityKind {
    Person,
    Country,
    CityOrRegion,
    Organization,
}

impl EntityKind {
    pub const ALL: [EntityKind; 4] =
        [EntityKind::Person, EntityKind::Country, EntityKind::CityOrRegion, EntityKind::Organization];
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntityKind::Person => "person",
            EntityKind::Country => "country",
            EntityKind::CityOrRegion => "city/region",
            EntityKind::Organization => "organization",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub kind: EntityKind,
    pub surface: String,
    /// Half-open byte range of the name itself, possessive excluded.
    pub span: Range<usize>,
    pub canonical_key: String,
    /// Byte length of a possessive suffix directly after `span` (0 if none).
    #[serde(default)]
    pub possessive_len: usize,
}

impl EntityMention {
    /// Span including any possessive suffix.
    pub fn full_span(&self) -> Range<usize> {
        self.span.start..self.span.end + self.possessive_len
    }
}

const BUNDLED_PERSONS: &str = include_str!("../data/person_names.txt");
const BUNDLED_COUNTRIES: &str = include_str!("../data/country_names.txt");
const BUNDLED_CITIES: &str = include_str!("../data/city_region_names.txt");
const BUNDLED_ORGS: &str = include_str!("../data/organization_names.txt");
const BUNDLED_PER_COUNTRY: [(&str, &str); 3] = [
    ("France", include_str!("../data/per_country/France.txt")),
    ("India", include_str!("../data/per_country/India.txt")),
    ("Spain", include_str!("../data/per_country/Spain.txt")),
];

/// Immutable name pools plus the matcher built over them.
///
/// Pools keep file order (after de-duplication) so that seeded sampling is
/// reproducible. A name listed in more than one match pool is kept only in
/// the highest-priority one: person, then country, city/region,
/// organization.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    persons: Vec<String>,
    countries: Vec<String>,
    cities: Vec<String>,
    organizations: Vec<String>,
    per_country: BTreeMap<String, Vec<String>>,
    matcher: PhraseMatcher<EntityKind>,
}

impl Gazetteer {
    pub fn builder() -> GazetteerBuilder {
        GazetteerBuilder::default()
    }

    /// Pools shipped with the crate.
    pub fn bundled() -> Gazetteer {
        let mut b = Gazetteer::builder()
            .persons(parse_name_list(BUNDLED_PERSONS))
            .countries(parse_name_list(BUNDLED_COUNTRIES))
            .cities(parse_name_list(BUNDLED_CITIES))
            .organizations(parse_name_list(BUNDLED_ORGS));
        for (country, body) in BUNDLED_PER_COUNTRY {
            b = b.per_country(country, parse_name_list(body));
        }
        b.build().expect("bundled gazetteer is valid")
    }

    pub fn pool(&self, kind: EntityKind) -> &[String] {
        match kind {
            EntityKind::Person => &self.persons,
            EntityKind::Country => &self.countries,
            EntityKind::CityOrRegion => &self.cities,
            EntityKind::Organization => &self.organizations,
        }
    }

    pub fn person_names(&self) -> &[String] {
        &self.persons
    }

    pub fn country_names(&self) -> &[String] {
        &self.countries
    }

    pub fn per_country_person_names(&self, country: &str) -> Option<&[String]> {
        self.per_country.get(country).map(Vec::as_slice)
    }

    pub fn per_country_keys(&self) -> impl Iterator<Item = &str> {
        self.per_country.keys().map(String::as_str)
    }

    /// Kind a surface form resolves to, if it is in any match pool.
    pub fn kind_of(&self, name: &str) -> Option<EntityKind> {
        self.matcher.get(name).copied()
    }

    /// Copy of this gazetteer with extra names added to a match pool.
    pub fn with_extra_names<I, S>(&self, kind: EntityKind, names: I) -> Result<Gazetteer>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut b = GazetteerBuilder {
            persons: self.persons.clone(),
            countries: self.countries.clone(),
            cities: self.cities.clone(),
            organizations: self.organizations.clone(),
            per_country: self.per_country.clone(),
        };
        let pool = match kind {
            EntityKind::Person => &mut b.persons,
            EntityKind::Country => &mut b.countries,
            EntityKind::CityOrRegion => &mut b.cities,
            EntityKind::Organization => &mut b.organizations,
        };
        pool.extend(names.into_iter().map(Into::into));
        b.build()
    }
}

#[derive(Debug, Clone, Default)]
pub struct GazetteerBuilder {
    persons: Vec<String>,
    countries: Vec<String>,
    cities: Vec<String>,
    organizations: Vec<String>,
    per_country: BTreeMap<String, Vec<String>>,
}

impl GazetteerBuilder {
    pub fn persons<I: IntoIterator<Item = S>, S: Into<String>>(mut self, names: I) -> Self {
        self.persons.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn countries<I: IntoIterator<Item = S>, S: Into<String>>(mut self, names: I) -> Self {
        self.countries.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn cities<I: IntoIterator<Item = S>, S: Into<String>>(mut self, names: I) -> Self {
        self.cities.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn organizations<I: IntoIterator<Item = S>, S: Into<String>>(mut self, names: I) -> Self {
        self.organizations.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn per_country<I: IntoIterator<Item = S>, S: Into<String>>(mut self, country: &str, names: I) -> Self {
        self.per_country.entry(country.to_string()).or_default().extend(names.into_iter().map(Into::into));
        self
    }

    pub fn build(self) -> Result<Gazetteer> {
        let mut matcher = PhraseMatcher::default();
        let mut pools: [Vec<String>; 4] = Default::default();
        let raw = [self.persons, self.countries, self.cities, self.organizations];
        for ((kind, names), pool) in EntityKind::ALL.into_iter().zip(raw).zip(pools.iter_mut()) {
            for name in dedup(names) {
                if let Some(owner) = matcher.get(&name) {
                    tracing::warn!(name = %name, kept = %owner, dropped = %kind, "name listed in two pools");
                    continue;
                }
                matcher.insert(name.clone(), kind);
                pool.push(name);
            }
        }
        let [persons, countries, cities, organizations] = pools;
        if persons.is_empty() {
            return Err(Error::Config("person name pool is empty".into()));
        }
        if countries.is_empty() {
            return Err(Error::Config("country name pool is empty".into()));
        }
        let mut per_country = BTreeMap::new();
        for (country, names) in self.per_country {
            let names = dedup(names);
            if names.is_empty() {
                return Err(Error::Config(format!("person pool for {country} is empty")));
            }
            per_country.insert(country, names);
        }
        tracing::debug!(
            persons = persons.len(),
            countries = countries.len(),
            cities = cities.len(),
            organizations = organizations.len(),
            per_country = per_country.len(),
            "gazetteer built"
        );
        Ok(Gazetteer { persons, countries, cities, organizations, per_country, matcher })
    }
}

fn dedup(names: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    names.into_iter().map(|n| n.trim().to_string()).filter(|n| !n.is_empty() && seen.insert(n.clone())).collect()
}

/// One entry per line; blank lines and `#` comments are skipped; duplicates
/// keep their first position.
pub fn parse_name_list(body: &str) -> Vec<String> {
    dedup(body.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_string).collect())
}

pub fn read_name_list(path: &Path) -> Result<Vec<String>> {
    let body = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read name list {}: {e}", path.display())))?;
    let names = parse_name_list(&body);
    if names.is_empty() {
        return Err(Error::Config(format!("name list {} is empty", path.display())));
    }
    tracing::info!(path = %path.display(), entries = names.len(), "loaded name list");
    Ok(names)
}

/// Load person and country pools, plus optional per-country person pools
/// from a directory of `<Country>.txt` files.
pub fn load_gazetteer(
    person_list_path: &Path,
    country_list_path: &Path,
    per_country_dir: Option<&Path>,
) -> Result<Gazetteer> {
    GazetteerFiles {
        persons: person_list_path,
        countries: country_list_path,
        per_country_dir,
        cities: None,
        organizations: None,
    }
    .load()
}

/// Full set of gazetteer file locations.
#[derive(Debug, Clone, Copy)]
pub struct GazetteerFiles<'a> {
    pub persons: &'a Path,
    pub countries: &'a Path,
    pub per_country_dir: Option<&'a Path>,
    pub cities: Option<&'a Path>,
    pub organizations: Option<&'a Path>,
}

impl GazetteerFiles<'_> {
    pub fn load(&self) -> Result<Gazetteer> {
        let mut b =
            Gazetteer::builder().persons(read_name_list(self.persons)?).countries(read_name_list(self.countries)?);
        if let Some(p) = self.cities {
            b = b.cities(read_name_list(p)?);
        }
        if let Some(p) = self.organizations {
            b = b.organizations(read_name_list(p)?);
        }
        if let Some(dir) = self.per_country_dir {
            let entries = fs::read_dir(dir)
                .map_err(|e| Error::Config(format!("cannot read per-country dir {}: {e}", dir.display())))?;
            let mut files: Vec<_> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            files.sort();
            for f in files {
                let Some(country) = f.file_stem().and_then(|s| s.to_str()) else { continue };
                b = b.per_country(country, read_name_list(&f)?);
            }
        }
        b.build()
    }
}

/// Every maximal occurrence of a pool entry whose kind is in `kinds`, sorted
/// by start offset and non-overlapping.
pub fn find_mentions(text: &str, gazetteer: &Gazetteer, kinds: &[EntityKind]) -> Vec<EntityMention> {
    // Match every pool first so that "Lucia" inside "Saint Lucia" stays part
    // of the country even when only persons are requested.
    gazetteer
        .matcher
        .scan(text, |_| true)
        .into_iter()
        .filter(|(_, kind)| kinds.contains(kind))
        .map(|(span, &kind)| {
            let surface = text[span.clone()].to_string();
            let possessive_len = possessive_suffix_len(&text[span.end..]);
            EntityMention { kind, canonical_key: surface.clone(), surface, span, possessive_len }
        })
        .collect()
}

fn possessive_suffix_len(rest: &str) -> usize {
    for apostrophe in ["'", "\u{2019}"] {
        if let Some(after) = rest.strip_prefix(apostrophe).and_then(|r| r.strip_prefix('s')) {
            if !after.chars().next().is_some_and(crate::text::is_letter) {
                return apostrophe.len() + 1;
            }
        }
    }
    0
}

/// Unique canonical keys of `kind`, in order of first appearance.
pub fn distinct_keys(mentions: &[EntityMention], kind: EntityKind) -> Vec<String> {
    let mut seen = HashSet::new();
    mentions
        .iter()
        .filter(|m| m.kind == kind && seen.insert(m.canonical_key.as_str()))
        .map(|m| m.canonical_key.clone())
        .collect()
}
