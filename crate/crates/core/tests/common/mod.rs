//! Oracles that re-derive generated answers from the catalogs without the
//! generators' code paths.

#![allow(dead_code)]

use std::collections::BTreeMap;

use faithdiag_core::datagen::{CategoryCatalog, GeoCatalog};
use faithdiag_core::domain::{validate_instance, EditStatement, TaskInstance};
use regex::Regex;

pub type Verdict = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

fn override_map(edits: &[EditStatement]) -> BTreeMap<String, String> {
    edits.iter().map(|e| (e.triplet.subject.clone(), e.triplet.object.clone())).collect()
}

struct CountQuestion {
    quantifier: Option<String>,
    target: String,
    items: Vec<String>,
    options: Option<(usize, usize)>,
}

fn parse_count(q: &str) -> Option<CountQuestion> {
    let count = Regex::new(r"^How many of them are (?:located in )?(.+?)\? (.+)\. \(A\) (\d+) \(B\) (\d+)\.$").unwrap();
    let quant = Regex::new(r"^Are (any|all) of them (?:located in )?(.+?)\? (.+)\. \(A\) yes \(B\) no\.$").unwrap();
    if let Some(c) = count.captures(q) {
        return Some(CountQuestion {
            quantifier: None,
            target: c[1].to_string(),
            items: c[2].split(", ").map(String::from).collect(),
            options: Some((c[3].parse().ok()?, c[4].parse().ok()?)),
        });
    }
    let c = quant.captures(q)?;
    Some(CountQuestion {
        quantifier: Some(c[1].to_string()),
        target: c[2].to_string(),
        items: c[3].split(", ").map(String::from).collect(),
        options: None,
    })
}

fn recount_label(q: &CountQuestion, hits: usize) -> Option<&'static str> {
    match (&q.quantifier, q.options) {
        (None, Some((a, b))) if a != b => {
            if hits == a {
                Some("A")
            } else if hits == b {
                Some("B")
            } else {
                None
            }
        }
        (Some(k), _) if k == "any" => Some(if hits > 0 { "A" } else { "B" }),
        (Some(_), _) => Some(if hits == q.items.len() { "A" } else { "B" }),
        _ => None,
    }
}

fn listed_members(expl: &str) -> Option<Vec<String>> {
    let head = Regex::new(r"^(.+?) (?:is|are)(?: located in)? .+\.$").unwrap();
    let c = head.captures(expl)?;
    Some(c[1].split(", ").map(String::from).collect())
}

/// Recounts the target type under each model and checks label and
/// explanation against it.
pub fn check_objectcount(inst: &TaskInstance, catalog: &CategoryCatalog) -> Verdict {
    ensure!(validate_instance(inst).is_valid(), "{}: invalid instance", inst.id);
    let truth: BTreeMap<&str, &str> = catalog.facts().map(|(e, _, t)| (e, t)).collect();
    let Some(q) = parse_count(&inst.question) else {
        return Err(format!("{}: unrecognised question", inst.id));
    };
    for (edits, expl) in [(&inst.edits_bar, &inst.expl_faithful), (&inst.edits_tilde, &inst.expl_unfaithful)] {
        let overrides = override_map(edits);
        let type_of = |e: &str| overrides.get(e).cloned().or_else(|| truth.get(e).map(|t| t.to_string()));
        let members: Vec<String> = q
            .items
            .iter()
            .filter(|e| type_of(e).as_deref() == Some(q.target.as_str()))
            .cloned()
            .collect();
        ensure!(
            recount_label(&q, members.len()) == Some(inst.answer.as_str()),
            "{}: recount {} disagrees with answer {}",
            inst.id,
            members.len(),
            inst.answer
        );
        ensure!(listed_members(expl) == Some(members), "{}: explanation '{expl}' lists wrong members", inst.id);
    }
    ensure!(override_map(&inst.edits_bar) != override_map(&inst.edits_tilde), "{}: identical edits", inst.id);
    Ok(())
}

/// Checks capital/city facts of the question against the catalog and the
/// orientation of both edit sets and explanations.
pub fn check_analogy(inst: &TaskInstance, geo: &GeoCatalog) -> Verdict {
    ensure!(validate_instance(inst).is_valid(), "{}: invalid instance", inst.id);
    let by_name: BTreeMap<&str, _> = geo.countries.iter().map(|c| (c.country.as_str(), c)).collect();
    let re = Regex::new(r"^Fill in the blank: (.+) is to (.+) like (.+) is to __ \(A\) (.+) \(B\) (.+)\.$").unwrap();
    let Some(c) = re.captures(&inst.question) else {
        return Err(format!("{}: unrecognised question", inst.id));
    };
    let (cap_a, country_a, city_b) = (&c[1], &c[2], &c[3]);
    let options = [c[4].to_string(), c[5].to_string()];
    let answer_idx = usize::from(inst.answer == "B");
    let (country_b, distractor) = (&options[answer_idx], &options[1 - answer_idx]);
    let (Some(a), Some(b)) = (by_name.get(country_a), by_name.get(country_b.as_str())) else {
        return Err(format!("{}: unknown country", inst.id));
    };
    ensure!(a.capital == cap_a, "{}: {cap_a} is not the capital of {country_a}", inst.id);
    ensure!(b.capital == city_b, "{}: {city_b} is not the capital of {country_b}", inst.id);
    ensure!(distractor != country_a && distractor != country_b, "{}: bad distractor", inst.id);
    let capital_of = |edits: &[EditStatement], country: &str| {
        edits
            .iter()
            .find(|e| e.triplet.relation == "capitalOf" && e.triplet.subject == country)
            .map(|e| e.triplet.object.clone())
    };
    ensure!(capital_of(&inst.edits_bar, country_b).as_deref() == Some(city_b), "{}: edits_bar", inst.id);
    ensure!(
        capital_of(&inst.edits_tilde, country_b).as_deref() == Some(b.noncapital_city.as_str()),
        "{}: edits_tilde",
        inst.id
    );
    ensure!(capital_of(&inst.edits_tilde, country_a).as_deref() == Some(cap_a), "{}: unchanged country", inst.id);
    ensure!(
        inst.expl_faithful.contains(&format!("The capital of {country_b} is {city_b}")),
        "{}: faithful explanation",
        inst.id
    );
    ensure!(
        inst.expl_unfaithful.contains(&format!("{city_b} is a city in {country_b}")),
        "{}: unfaithful explanation",
        inst.id
    );
    Ok(())
}

pub fn all_pass<'a>(instances: &'a [TaskInstance], check: impl Fn(&'a TaskInstance) -> Verdict) -> Verdict {
    let failures: Vec<String> = instances.iter().filter_map(|i| check(i).err()).collect();
    match failures.first() {
        None => Ok(()),
        Some(first) => Err(format!("{} of {} failed, first: {first}", failures.len(), instances.len())),
    }
}
