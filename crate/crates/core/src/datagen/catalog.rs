use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::text::{Membership, IS, LOCATED_IN};

pub const TYPES_PER_CATEGORY: usize = 5;
pub const MIN_ENTITIES_PER_TYPE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Country {
    pub country: String,
    pub capital: String,
    pub noncapital_city: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GeoCatalog {
    pub countries: Vec<Country>,
}

fn clean_name(s: &str) -> bool {
    !s.trim().is_empty() && !s.contains(['.', ',', '?', '(', ')', '_'])
}

impl GeoCatalog {
    /// Parses `country<TAB>capital<TAB>noncapital_city` rows after a header.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let countries = text
            .lines()
            .enumerate()
            .skip(1)
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
                let [country, capital, noncapital_city] = cols[..] else {
                    bail!(InvalidRow, "line {}: expected 3 tab-separated columns", i + 1);
                };
                Ok(Country {
                    country: country.into(),
                    capital: capital.into(),
                    noncapital_city: noncapital_city.into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let geo = GeoCatalog { countries };
        geo.validate()?;
        Ok(geo)
    }

    pub fn validate(&self) -> Result<()> {
        let mut cities = HashSet::new();
        let mut names = HashSet::new();
        for c in &self.countries {
            if [&c.country, &c.capital, &c.noncapital_city].iter().any(|s| !clean_name(s)) {
                bail!(InvalidRow, "country '{}' has an empty or unsupported name", c.country);
            }
            if c.capital == c.noncapital_city {
                bail!(InvalidRow, "country '{}' lists its capital as a non-capital city", c.country);
            }
            if !names.insert(c.country.as_str()) {
                bail!(InvalidRow, "duplicate country '{}'", c.country);
            }
            for city in [&c.capital, &c.noncapital_city] {
                if !cities.insert(city.as_str()) {
                    bail!(InvalidRow, "city '{city}' appears more than once");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    /// Either "is" or "is located in".
    pub membership: String,
    pub types: BTreeMap<String, Vec<String>>,
}

impl Category {
    pub fn membership(&self) -> Membership {
        if self.membership == LOCATED_IN {
            Membership::LocatedIn
        } else {
            Membership::Is
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCatalog {
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    pub categories: BTreeMap<String, Category>,
}

fn default_holdout() -> f64 {
    0.2
}

impl CategoryCatalog {
    pub fn from_json(text: &str) -> Result<Self> {
        let catalog: CategoryCatalog = serde_json::from_str(text)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            bail!(Config, "holdout_fraction {} outside [0, 1)", self.holdout_fraction);
        }
        let mut seen = HashSet::new();
        for (name, cat) in &self.categories {
            if cat.membership != IS && cat.membership != LOCATED_IN {
                bail!(InvalidRow, "category '{name}': unsupported membership '{}'", cat.membership);
            }
            if cat.types.len() != TYPES_PER_CATEGORY {
                bail!(
                    InvalidRow,
                    "category '{name}' has {} types, expected {TYPES_PER_CATEGORY}",
                    cat.types.len()
                );
            }
            for (ty, entities) in &cat.types {
                if entities.len() < MIN_ENTITIES_PER_TYPE {
                    bail!(InvalidRow, "type '{ty}' has {} entities", entities.len());
                }
                for e in entities {
                    if !clean_name(e) || e.contains(" and ") || e.contains(" are ") || e.contains(" is ") {
                        bail!(InvalidRow, "entity '{e}' cannot be listed in a question");
                    }
                    if !seen.insert(e.as_str()) {
                        bail!(InvalidRow, "entity '{e}' belongs to more than one type");
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of entities of a type reserved for reassignment.
    pub fn holdout_len(&self, n_entities: usize) -> usize {
        ((n_entities as f64 * self.holdout_fraction).round() as usize).min(n_entities)
    }

    /// (kept, held out) entities of a type. The held-out ones are the last
    /// entities in catalog order.
    pub fn split<'a>(&self, entities: &'a [String]) -> (&'a [String], &'a [String]) {
        entities.split_at(entities.len() - self.holdout_len(entities.len()))
    }

    /// Every (entity, membership relation, type) fact of the ground taxonomy.
    pub fn facts(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.categories.values().flat_map(|cat| {
            cat.types.iter().flat_map(move |(ty, es)| {
                es.iter().map(move |e| (e.as_str(), cat.membership.as_str(), ty.as_str()))
            })
        })
    }
}
