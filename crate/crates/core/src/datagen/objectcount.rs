use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::catalog::CategoryCatalog;
use crate::domain::{KnowledgeTriplet, TaskInstance, TaskKind};
use crate::editing::build_edit_statements;
use crate::error::{bail, Result};
use crate::text::{count_question, quantifier_question, Membership, Quantifier};

pub const MIN_ITEMS: usize = 3;
pub const MAX_ITEMS: usize = 6;

/// Lists the members of `target` among the items, e.g. "grape, apple are fruit."
pub fn membership_explanation(members: &[&str], target: &str, membership: Membership) -> String {
    let located = if membership == Membership::LocatedIn { " located in" } else { "" };
    match members {
        [] => format!("None of them are{located} {target}."),
        [one] => format!("{one} is{located} {target}."),
        many => format!("{} are{located} {target}.", many.join(", ")),
    }
}

/// Alternates number questions and any/all questions. Each instance swaps
/// one held-out entity of the target type with one held-out entity of
/// another type, which keeps the number of targets in the list fixed.
pub fn gen_objectcount(catalog: &CategoryCatalog, n: usize, seed: u64) -> Result<Vec<TaskInstance>> {
    let usable: Vec<&String> = catalog
        .categories
        .iter()
        .filter(|(_, cat)| {
            let holdouts = cat.types.values().filter(|es| !catalog.split(es).1.is_empty()).count();
            let kept: usize = cat.types.values().map(|es| catalog.split(es).0.len()).min().unwrap_or(0);
            holdouts >= 2 && kept >= MAX_ITEMS - 2
        })
        .map(|(name, _)| name)
        .collect();
    if usable.is_empty() && n > 0 {
        bail!(
            ConstraintUnsatisfiable,
            "no category has two types with held-out entities and enough kept entities"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let cat_name = *usable.choose(&mut rng).expect("non-empty");
            let cat = &catalog.categories[cat_name];
            let membership = cat.membership();
            let with_holdout: Vec<&String> = cat
                .types
                .iter()
                .filter(|(_, es)| !catalog.split(es).1.is_empty())
                .map(|(t, _)| t)
                .collect();
            let target = *with_holdout.choose(&mut rng).expect("two types");
            let other = *with_holdout
                .iter()
                .filter(|t| **t != target)
                .choose(&mut rng)
                .expect("two types");
            let k = rng.random_range(MIN_ITEMS..=MAX_ITEMS);
            let c = rng.random_range(1..k);

            let (t_kept, t_held) = catalog.split(&cat.types[target]);
            let (_, o_held) = catalog.split(&cat.types[other]);
            let h_t = t_held.choose(&mut rng).expect("held out");
            let h_o = o_held.choose(&mut rng).expect("held out");
            let others_kept: Vec<&String> = cat
                .types
                .iter()
                .filter(|(t, _)| *t != target)
                .flat_map(|(_, es)| catalog.split(es).0)
                .collect();
            if t_kept.len() < c - 1 || others_kept.len() < k - c - 1 {
                bail!(ConstraintUnsatisfiable, "type '{target}' cannot supply {k} items");
            }
            let mut items: Vec<&String> = vec![h_t, h_o];
            items.extend(t_kept.choose_multiple(&mut rng, c - 1));
            items.extend(others_kept.choose_multiple(&mut rng, k - c - 1).copied());
            items.shuffle(&mut rng);
            let items: Vec<String> = items.into_iter().cloned().collect();

            let is_target_bar = |e: &String| cat.types[target].contains(e);
            let is_target_tilde = |e: &String| (is_target_bar(e) && e != h_t) || e == h_o;
            let members = |f: &dyn Fn(&String) -> bool| -> Vec<&str> {
                items.iter().filter(|e| f(e)).map(String::as_str).collect()
            };
            let triplet = |e: &str, t: &str| KnowledgeTriplet::new(e, membership.relation(), t);
            let edits_bar = build_edit_statements(
                TaskKind::Objectcount,
                &[triplet(h_t, target), triplet(h_o, other)],
            )?;
            let edits_tilde = build_edit_statements(
                TaskKind::Objectcount,
                &[triplet(h_t, other), triplet(h_o, target)],
            )?;

            let (question, answer, kind) = if i % 2 == 0 {
                let distractor = (0..=k).filter(|&d| d != c).choose(&mut rng).expect("k >= 3");
                let first = rng.random_bool(0.5);
                let options = if first { [c, distractor] } else { [distractor, c] };
                (
                    count_question(target, membership, &items, options),
                    if first { "A" } else { "B" },
                    "count",
                )
            } else if i % 4 == 1 {
                (quantifier_question(Quantifier::Any, target, membership, &items), "A", "any")
            } else {
                (quantifier_question(Quantifier::All, target, membership, &items), "B", "all")
            };
            Ok(TaskInstance {
                id: format!("objectcount-{i:05}"),
                task: TaskKind::Objectcount,
                question,
                labels: vec!["A".into(), "B".into()],
                answer: answer.into(),
                edits_bar,
                edits_tilde,
                expl_faithful: membership_explanation(&members(&is_target_bar), target, membership),
                expl_unfaithful: membership_explanation(&members(&is_target_tilde), target, membership),
                meta: BTreeMap::from([
                    ("category".to_string(), cat_name.clone()),
                    ("kind".to_string(), kind.to_string()),
                    ("count".to_string(), c.to_string()),
                ]),
            })
        })
        .collect()
}
