use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rigid_coverage::bearing::{is_infinitesimally_bearing_rigid, Configuration, Framework, DEFAULT_RANK_TOL};
use rigid_coverage::graph::{henneberg_generate, laman_check, Graph};
use rigid_coverage::recovery::{apply_repair, build_recovery_plan, closing_ranks, is_contractible, repair_framework, RecoveryPlan};

#[test]
fn plan_entries_agree_with_direct_repairs() {
    for seed in 0..10 {
        let g = henneberg_generate(8, seed, 0.5).unwrap().graph;
        let plan = build_recovery_plan(&g).unwrap();
        for ((i, j), repair) in &plan.entries {
            assert!(g.has_edge(*i, *j));
            assert_eq!(*repair, closing_ranks(&g, *j).unwrap());
        }
        let expected: usize = (0..8).map(|v| g.degree(v)).sum();
        assert_eq!(plan.entries.len(), expected);
    }
}

#[test]
fn plan_json_round_trip() {
    let g = henneberg_generate(7, 3, 0.5).unwrap().graph;
    let plan = build_recovery_plan(&g).unwrap();
    let text = serde_json::to_string(&plan).unwrap();
    let back: RecoveryPlan = serde_json::from_str(&text).unwrap();
    assert_eq!(back, plan);
    assert!(serde_json::from_str::<RecoveryPlan>(r#"{"1-2": {"contraction_vertex": null, "new_edges": []}}"#).is_err());
}

#[test]
fn framework_repair_keeps_positions_and_rigidity() {
    let g = henneberg_generate(7, 8, 0.5).unwrap().graph;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pts: Vec<[f64; 2]> = (0..7).map(|_| [rng.random(), rng.random()]).collect();
    let fw = Framework::new(g, Configuration::planar(&pts).unwrap()).unwrap();
    for lost in 0..7 {
        let (repaired, _) = repair_framework(&fw, lost).unwrap();
        assert_eq!(repaired.n(), 6);
        assert!(is_infinitesimally_bearing_rigid(&repaired, DEFAULT_RANK_TOL).unwrap());
        let survivors: Vec<usize> = (0..7).filter(|&v| v != lost).collect();
        for (new, old) in survivors.iter().enumerate() {
            assert_eq!(repaired.config().point(new), fw.config().point(*old));
        }
    }
}

#[test]
fn contraction_with_two_common_neighbors_is_rejected() {
    // v = 0 and v2 = 2 share v1 and v3
    let fan = Graph::from_edges(6, [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
    assert!(!is_contractible(&fan, 0, 2).unwrap().contractible);
    assert!(is_contractible(&fan, 0, 1).unwrap().contractible);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn any_single_loss_is_repaired_minimally(n in 4usize..11, seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let g = henneberg_generate(n, seed, 0.5).unwrap().graph;
        let lost = pick.index(n);
        let repair = closing_ranks(&g, lost).unwrap();
        prop_assert_eq!(repair.new_edges.len(), g.degree(lost) - 2);
        let h = apply_repair(&g, lost, &repair.new_edges).unwrap();
        prop_assert_eq!(h.edge_count(), 2 * (n - 1) - 3);
        prop_assert!(laman_check(&h).unwrap().is_laman);
        for (a, b) in &repair.new_edges {
            prop_assert!(g.has_edge(lost, *a) && g.has_edge(lost, *b));
            prop_assert!(!g.has_edge(*a, *b));
        }
    }
}
