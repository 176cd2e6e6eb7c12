use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rigid_coverage::bearing::{
    bearing_function, is_infinitesimally_bearing_rigid, rigidity_matrix, rigidity_rank, Configuration, Framework, DEFAULT_RANK_TOL,
};
use rigid_coverage::graph::{henneberg_generate, henneberg_replay, laman_check_exhaustive, laman_check_pebble, Graph};

fn random_points(seed: u64, n: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

fn random_graph(seed: u64, n: usize, m: usize) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n);
    while g.edge_count() < m {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i != j && !g.has_edge(i, j) {
            g.add_edge(i, j).unwrap();
        }
    }
    g
}

#[test]
fn pebble_game_agrees_with_enumeration() {
    for seed in 0..300 {
        let n = 3 + (seed as usize % 8);
        let m = (2 * n - 3).min(n * (n - 1) / 2);
        let g = random_graph(seed, n, m);
        let a = laman_check_exhaustive(&g).unwrap().is_laman;
        let b = laman_check_pebble(&g).unwrap().is_laman;
        assert_eq!(a, b, "seed {seed}: {:?}", g.edge_list());
    }
}

#[test]
fn henneberg_log_replays_to_the_same_graph() {
    for seed in 0..20 {
        let build = henneberg_generate(9, seed, 0.5).unwrap();
        assert_eq!(henneberg_replay(&build.log).unwrap(), build.graph);
    }
}

#[test]
fn one_extra_edge_breaks_minimality() {
    for seed in 0..30 {
        let mut g = henneberg_generate(7, seed, 0.5).unwrap().graph;
        let (i, j) = (0..7)
            .flat_map(|i| (i + 1..7).map(move |j| (i, j)))
            .find(|&(i, j)| !g.has_edge(i, j))
            .unwrap();
        g.add_edge(i, j).unwrap();
        assert!(!laman_check_pebble(&g).unwrap().is_laman);
    }
}

#[test]
fn dropping_an_edge_loses_rigidity() {
    let g = henneberg_generate(6, 4, 0.5).unwrap().graph;
    let pts = random_points(4, 6);
    let (a, b) = g.edge_list()[0];
    let mut h = g.clone();
    h.remove_edge(a, b).unwrap();
    let fw = Framework::new(g, Configuration::planar(&pts).unwrap()).unwrap();
    let fw_h = Framework::new(h, Configuration::planar(&pts).unwrap()).unwrap();
    assert!(is_infinitesimally_bearing_rigid(&fw, DEFAULT_RANK_TOL).unwrap());
    assert!(!is_infinitesimally_bearing_rigid(&fw_h, DEFAULT_RANK_TOL).unwrap());
}

#[test]
fn collinear_points_are_not_rigid() {
    let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
    let fw = Framework::new(g, Configuration::planar(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]).unwrap()).unwrap();
    assert_eq!(rigidity_rank(&fw, DEFAULT_RANK_TOL).unwrap().rank, 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_graphs_are_laman(n in 3usize..12, seed in any::<u64>(), split in 0.0f64..1.0) {
        let g = henneberg_generate(n, seed, split).unwrap().graph;
        prop_assert_eq!(g.edge_count(), 2 * n - 3);
        prop_assert!(laman_check_pebble(&g).unwrap().is_laman);
    }

    #[test]
    fn bearings_invariant_under_translation_and_scaling(
        seed in any::<u64>(),
        shift in prop::array::uniform2(-5.0f64..5.0),
        scale in 0.1f64..10.0,
    ) {
        let g = henneberg_generate(6, seed, 0.5).unwrap().graph;
        let pts = random_points(seed, 6);
        let moved: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] * scale + shift[0], p[1] * scale + shift[1]]).collect();
        let a = Framework::new(g.clone(), Configuration::planar(&pts).unwrap()).unwrap();
        let b = Framework::new(g, Configuration::planar(&moved).unwrap()).unwrap();
        let ga = bearing_function(&a).unwrap().stacked();
        let gb = bearing_function(&b).unwrap().stacked();
        prop_assert!((ga - gb).amax() < 1e-12);
        prop_assert_eq!(rigidity_rank(&a, DEFAULT_RANK_TOL).unwrap().rank, rigidity_rank(&b, DEFAULT_RANK_TOL).unwrap().rank);
    }

    #[test]
    fn rigidity_matrix_rows_are_orthogonal_to_bearings(seed in any::<u64>()) {
        let g = henneberg_generate(5, seed, 0.5).unwrap().graph;
        let fw = Framework::new(g, Configuration::planar(&random_points(seed, 5)).unwrap()).unwrap();
        let rb = rigidity_matrix(&fw).unwrap();
        let bv = bearing_function(&fw).unwrap();
        for (k, b) in bv.bearings.iter().enumerate() {
            // each block is a multiple of the projector onto b's complement
            let block = rb.view((2 * k, 0), (2, rb.ncols()));
            let along: DVector<f64> = block.transpose() * b;
            prop_assert!(along.amax() < 1e-12);
        }
    }
}
