use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{KnowledgeTriplet, TaskInstance, TaskKind};
use crate::editing::build_edit_statements;
use crate::error::{bail, Result};
use crate::text::{factcheck_question, has_article, normalize_entity, with_article, IS};

/// Siblings of `object` other than the object itself.
fn candidates<'a>(object: &str, siblings: &'a BTreeMap<String, Vec<String>>) -> Vec<&'a String> {
    let key = normalize_entity(object);
    siblings
        .get(&key)
        .map(|s| s.iter().filter(|x| normalize_entity(x) != key).collect())
        .unwrap_or_default()
}

/// Gives a sibling the same determiner style as the object it replaces.
fn match_article(object: &str, sibling: &str) -> String {
    if has_article(object) {
        with_article(sibling)
    } else {
        sibling.trim().to_string()
    }
}

/// "S is Ō, not O." for copular relations, "S R Ō, not O." otherwise.
pub fn factcheck_explanation(t: &KnowledgeTriplet, counterfactual: &str) -> String {
    let r = t.relation.trim();
    let copular_noun = ["is a ", "is an ", "is the "].iter().any(|p| r.starts_with(p));
    if r == IS {
        format!("{} is {counterfactual}, not {}.", t.subject, t.object)
    } else if copular_noun {
        format!("{} is {counterfactual}, not {} {}.", t.subject, &r[3..], t.object)
    } else {
        format!("{} {r} {counterfactual}, not {}.", t.subject, t.object)
    }
}

/// Yes/no questions about true facts, answered "no" by both edited models
/// because each replaces the object with a different sibling.
pub fn gen_factcheck(
    triplets: &[KnowledgeTriplet],
    siblings: &BTreeMap<String, Vec<String>>,
    n: usize,
    seed: u64,
) -> Result<Vec<TaskInstance>> {
    if triplets.is_empty() {
        bail!(NoCounterfactuals, "no triplets supplied");
    }
    for t in triplets {
        if !t.is_valid() {
            bail!(InvalidInstance, "invalid triplet {t}");
        }
        if candidates(&t.object, siblings).len() < 2 {
            bail!(NoCounterfactuals, "object '{}' of {t} has fewer than 2 siblings", t.object);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    while order.len() < n {
        let mut round: Vec<usize> = (0..triplets.len()).collect();
        round.shuffle(&mut rng);
        order.extend(round);
    }
    order.truncate(n);
    order
        .into_iter()
        .enumerate()
        .map(|(i, idx)| {
            let t = &triplets[idx];
            let picks: Vec<&String> = candidates(&t.object, siblings)
                .choose_multiple(&mut rng, 2)
                .copied()
                .collect();
            let o_bar = match_article(&t.object, picks[0]);
            let o_tilde = match_article(&t.object, picks[1]);
            let edit = |o: &str| {
                build_edit_statements(
                    TaskKind::Factcheck,
                    &[KnowledgeTriplet::new(&t.subject, &t.relation, o)],
                )
            };
            Ok(TaskInstance {
                id: format!("factcheck-{i:05}"),
                task: TaskKind::Factcheck,
                question: factcheck_question(t),
                labels: vec!["yes".into(), "no".into()],
                answer: "no".into(),
                edits_bar: edit(&o_bar)?,
                edits_tilde: edit(&o_tilde)?,
                expl_faithful: factcheck_explanation(t, &o_bar),
                expl_unfaithful: factcheck_explanation(t, &o_tilde),
                meta: BTreeMap::from([("source".to_string(), t.to_string())]),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_instance;

    fn sib(pairs: &[(&str, &[&str])]) -> BTreeMap<String, Vec<String>> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    #[test]
    fn rihanna_example() {
        let t = KnowledgeTriplet::new("Rihanna", "is", "a singer");
        let out = gen_factcheck(&[t], &sib(&[("singer", &["researcher", "lawyer"])]), 1, 0).unwrap();
        let inst = &out[0];
        assert_eq!(inst.question, "Is Rihanna a singer?");
        assert_eq!(inst.answer, "no");
        let mut objects = vec![
            inst.edits_bar[0].triplet.object.clone(),
            inst.edits_tilde[0].triplet.object.clone(),
        ];
        objects.sort();
        assert_eq!(objects, ["a lawyer", "a researcher"]);
        assert!(inst.expl_faithful.contains(&inst.edits_bar[0].triplet.object));
        assert!(validate_instance(inst).is_valid());
    }

    #[test]
    fn copular_relation_explanation() {
        let t = KnowledgeTriplet::new("Joe Biden", "is the president of", "the United States");
        assert_eq!(
            factcheck_explanation(&t, "a researcher"),
            "Joe Biden is a researcher, not the president of the United States."
        );
        let t = KnowledgeTriplet::new("Satchel Paige", "professionally plays the sport", "baseball");
        assert_eq!(
            factcheck_explanation(&t, "hurling"),
            "Satchel Paige professionally plays the sport hurling, not baseball."
        );
    }

    #[test]
    fn deterministic_and_cycles() {
        let ts = crate::bundled::factcheck_triplets();
        let s = crate::bundled::siblings();
        let a = gen_factcheck(&ts, &s, 100, 5).unwrap();
        let b = gen_factcheck(&ts, &s, 100, 5).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|i| validate_instance(i).is_valid()));
    }

    #[test]
    fn missing_siblings() {
        let t = KnowledgeTriplet::new("Rihanna", "is", "a singer");
        let err = gen_factcheck(&[t], &sib(&[("singer", &["lawyer"])]), 1, 0).unwrap_err();
        assert_eq!(err.code(), crate::ErrorCode::NoCounterfactuals);
    }
}
