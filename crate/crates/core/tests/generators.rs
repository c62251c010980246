mod common;

use common::{all_pass, check_analogy, check_objectcount};
use faithdiag_core::datagen::{gen_analogy, gen_factcheck, gen_objectcount};
use faithdiag_core::domain::{validate_instance, KnowledgeTriplet};
use faithdiag_core::editing::{build_edit_statements, render_ice_context};
use faithdiag_core::{bundled, TaskKind};

#[test]
fn objectcount_recount_oracle() {
    let catalog = bundled::category_catalog();
    let instances = gen_objectcount(&catalog, 1000, 5).unwrap();
    assert_eq!(instances.len(), 1000);
    all_pass(&instances, |i| check_objectcount(i, &catalog)).unwrap();
}

#[test]
fn analogy_consistency_oracle() {
    let geo = bundled::geo_catalog();
    let instances = gen_analogy(&geo, 1000, 9).unwrap();
    all_pass(&instances, |i| check_analogy(i, &geo)).unwrap();
}

#[test]
fn factcheck_counterfactual_oracle() {
    let triplets = bundled::factcheck_triplets();
    let siblings = bundled::siblings();
    for inst in gen_factcheck(&triplets, &siblings, 300, 2).unwrap() {
        assert!(validate_instance(&inst).is_valid(), "{}", inst.id);
        let source = &inst.meta["source"];
        let t = triplets.iter().find(|t| &t.to_string() == source).unwrap();
        let (bar, tilde) = (&inst.edits_bar[0].triplet, &inst.edits_tilde[0].triplet);
        assert_eq!((&bar.subject, &bar.relation), (&t.subject, &t.relation));
        assert!(bar.object != t.object && tilde.object != t.object && bar.object != tilde.object);
        assert_eq!(inst.answer, "no");
        assert!(inst.expl_faithful.contains(&bar.object));
        assert!(inst.expl_unfaithful.contains(&tilde.object));
    }
}

#[test]
fn ice_prefix_matches_golden() {
    let edits = [
        build_edit_statements(TaskKind::Factcheck, &[KnowledgeTriplet::new("Rihanna", "is", "a researcher")]).unwrap(),
        build_edit_statements(
            TaskKind::Analogy,
            &[
                KnowledgeTriplet::new("United Kingdom", "capitalOf", "Birmingham"),
                KnowledgeTriplet::new("London", "cityOf", "United Kingdom"),
            ],
        )
        .unwrap(),
        build_edit_statements(
            TaskKind::Objectcount,
            &[KnowledgeTriplet::new("Aspendos Theater", "is located in", "Spain")],
        )
        .unwrap(),
    ]
    .concat();
    let prefix = render_ice_context(&edits).unwrap().render_prefix();
    assert_eq!(prefix, include_str!("fixtures/ice_prefix_golden.txt"));
}

#[test]
fn oracles_reject_tampered_instances() {
    let catalog = bundled::category_catalog();
    let mut oc = gen_objectcount(&catalog, 4, 1).unwrap();
    oc[0].answer = if oc[0].answer == "A" { "B" } else { "A" }.into();
    let o = &mut oc[1];
    std::mem::swap(&mut o.expl_faithful, &mut o.expl_unfaithful);
    oc[2].edits_tilde = oc[2].edits_bar.clone();
    assert!(check_objectcount(&oc[0], &catalog).is_err());
    assert!(check_objectcount(&oc[1], &catalog).is_err());
    assert!(check_objectcount(&oc[2], &catalog).is_err());
    assert!(check_objectcount(&oc[3], &catalog).is_ok());

    let geo = bundled::geo_catalog();
    let mut an = gen_analogy(&geo, 2, 1).unwrap();
    let a = &mut an[0];
    std::mem::swap(&mut a.edits_bar, &mut a.edits_tilde);
    assert!(check_analogy(&an[0], &geo).is_err());
    assert!(check_analogy(&an[1], &geo).is_ok());
}
