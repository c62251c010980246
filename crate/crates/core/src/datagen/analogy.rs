use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::catalog::GeoCatalog;
use crate::domain::{KnowledgeTriplet, TaskInstance, TaskKind};
use crate::editing::build_edit_statements;
use crate::error::{bail, Result};
use crate::text::{analogy_question, CAPITAL_OF, CITY_OF};

pub fn capital_explanation(country_a: &str, capital_a: &str, country_b: &str, city_b: &str) -> String {
    format!("The capital of {country_b} is {city_b}, as the capital of {country_a} is {capital_a}.")
}

pub fn city_explanation(country_a: &str, capital_a: &str, country_b: &str, city_b: &str) -> String {
    format!("{city_b} is a city in {country_b}, as {capital_a} is a city in {country_a}.")
}

/// Fill-in-the-blank analogies pairing a country whose capital never
/// changes (A) with one whose capital moves to its non-capital city in the
/// second model (B). The first model answers through `capitalOf`, the second
/// only through `cityOf`.
pub fn gen_analogy(geo: &GeoCatalog, n_pairs: usize, seed: u64) -> Result<Vec<TaskInstance>> {
    let m = geo.countries.len();
    if m < 3 {
        bail!(SamplingExhausted, "need at least 3 countries, got {m}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut rng);
    let (changed, unchanged) = idx.split_at(m / 2);
    let total = changed.len() * unchanged.len();
    if n_pairs > total {
        bail!(SamplingExhausted, "{n_pairs} pairs requested but only {total} exist");
    }
    let mut pairs: Vec<(usize, usize)> = unchanged
        .iter()
        .flat_map(|&a| changed.iter().map(move |&b| (a, b)))
        .collect();
    pairs.shuffle(&mut rng);
    pairs.truncate(n_pairs);

    pairs
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let (ca, cb) = (&geo.countries[a], &geo.countries[b]);
            let others: Vec<usize> = (0..m).filter(|&k| k != a && k != b).collect();
            let distractor = &geo.countries[*others.choose(&mut rng).expect("m >= 3")].country;
            let answer_first = rng.random_bool(0.5);
            let options = if answer_first {
                [cb.country.as_str(), distractor.as_str()]
            } else {
                [distractor.as_str(), cb.country.as_str()]
            };
            let edits = |capital_b: &str| {
                build_edit_statements(
                    TaskKind::Analogy,
                    &[
                        KnowledgeTriplet::new(&ca.country, CAPITAL_OF, &ca.capital),
                        KnowledgeTriplet::new(&cb.country, CAPITAL_OF, capital_b),
                        KnowledgeTriplet::new(&ca.capital, CITY_OF, &ca.country),
                        KnowledgeTriplet::new(&cb.capital, CITY_OF, &cb.country),
                    ],
                )
            };
            Ok(TaskInstance {
                id: format!("analogy-{i:05}"),
                task: TaskKind::Analogy,
                question: analogy_question(&ca.capital, &ca.country, &cb.capital, options),
                labels: vec!["A".into(), "B".into()],
                answer: if answer_first { "A" } else { "B" }.into(),
                edits_bar: edits(&cb.capital)?,
                edits_tilde: edits(&cb.noncapital_city)?,
                expl_faithful: capital_explanation(&ca.country, &ca.capital, &cb.country, &cb.capital),
                expl_unfaithful: city_explanation(&ca.country, &ca.capital, &cb.country, &cb.capital),
                meta: BTreeMap::from([
                    ("unchanged".to_string(), ca.country.clone()),
                    ("changed".to_string(), cb.country.clone()),
                    ("distractor".to_string(), distractor.clone()),
                ]),
            })
        })
        .collect()
}
