use proptest::prelude::*;

use rigid_coverage::coverage::{
    centroids, coverage_cost, coverage_cost_at, lloyd_step, voronoi_partition, ConvexRegion, DensityField, Point, Quadrature,
};

fn points(raw: &[(f64, f64)]) -> Vec<Point> {
    raw.iter().map(|&(x, y)| Point::new(x, y)).collect()
}

fn well_separated(p: &[Point]) -> bool {
    p.iter().enumerate().all(|(i, a)| p[..i].iter().all(|b| (a - b).norm() > 1e-3))
}

#[test]
fn one_robot_at_center_of_unit_square() {
    let h = coverage_cost_at(&[Point::new(0.5, 0.5)], &ConvexRegion::unit_square(), &DensityField::Uniform, &Quadrature::default()).unwrap();
    assert!((h - 1.0 / 6.0).abs() < 1e-14);
}

#[test]
fn lloyd_iterations_approach_a_centroidal_configuration() {
    let region = ConvexRegion::unit_square();
    let density = DensityField::gaussian([0.3, 0.7], 0.25);
    let quad = Quadrature::default();
    let mut p = points(&[(0.1, 0.1), (0.2, 0.1), (0.1, 0.2), (0.2, 0.25)]);
    let mut last = f64::INFINITY;
    for _ in 0..200 {
        let h = coverage_cost_at(&p, &region, &density, &quad).unwrap();
        assert!(h <= last + 1e-12);
        last = h;
        p = lloyd_step(&p, &region, &density, &quad).unwrap();
    }
    let c = centroids(&voronoi_partition(&p, &region).unwrap(), &density, &quad).unwrap();
    for (a, b) in p.iter().zip(&c) {
        assert!((a - b).norm() < 1e-3);
    }
}

#[test]
fn triangle_region() {
    let region = ConvexRegion::new(points(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)])).unwrap();
    let cells = voronoi_partition(&points(&[(0.2, 0.2)]), &region).unwrap();
    let c = centroids(&cells, &DensityField::Uniform, &Quadrature::default()).unwrap();
    assert!((c[0] - Point::new(1.0 / 3.0, 1.0 / 3.0)).norm() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cells_tile_the_region(raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..9)) {
        let p = points(&raw);
        prop_assume!(well_separated(&p));
        let part = voronoi_partition(&p, &ConvexRegion::unit_square()).unwrap();
        prop_assert!((part.total_area() - 1.0).abs() < 1e-12);
        for (i, cell) in part.cells.iter().enumerate() {
            prop_assert!(cell.contains(&p[i], 1e-12));
        }
    }

    #[test]
    fn centroids_lie_in_their_cells(raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..7)) {
        let p = points(&raw);
        prop_assume!(well_separated(&p));
        let part = voronoi_partition(&p, &ConvexRegion::unit_square()).unwrap();
        let density = DensityField::gaussian([0.6, 0.4], 0.3);
        let c = centroids(&part, &density, &Quadrature::default()).unwrap();
        for (cell, ci) in part.cells.iter().zip(&c) {
            prop_assert!(cell.contains(ci, 1e-9));
        }
    }

    #[test]
    fn lloyd_step_never_increases_cost(raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..7)) {
        let p = points(&raw);
        prop_assume!(well_separated(&p));
        let region = ConvexRegion::unit_square();
        let quad = Quadrature::default();
        let part = voronoi_partition(&p, &region).unwrap();
        let before = coverage_cost(&p, &part, &DensityField::Uniform, &quad).unwrap();
        let next = lloyd_step(&p, &region, &DensityField::Uniform, &quad).unwrap();
        let after = coverage_cost_at(&next, &region, &DensityField::Uniform, &quad).unwrap();
        prop_assert!(after <= before + 1e-12);
    }
}
