//! Voronoi partitions of a convex region, density-weighted centroids, the
//! locational cost and the partition-update criterion.

mod density;
mod geometry;
mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use density::{DensityField, GaussianComponent};
pub use geometry::{ConvexRegion, Point, Polygon};
pub use quadrature::{integrate, integrate_polynomial, Quadrature};

/// Sites closer than this are rejected as coincident.
pub const MIN_SITE_SEPARATION: f64 = 1e-7;
/// Cells whose integrated density falls below this have no centroid.
pub const MIN_MASS: f64 = 1e-12;
/// Stored tracking errors at or below this count as converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// Per-robot `||p_i - r_i||` recorded at the last partition update.
pub type TrackingErrors = Vec<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoronoiPartition {
    /// One cell per robot, in the order of the positions.
    pub cells: Vec<Polygon>,
}

impl VoronoiPartition {
    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(Polygon::area).sum()
    }
}

/// Clips the region by the bisector half-planes of every other site.
pub fn voronoi_partition(positions: &[Point], region: &ConvexRegion) -> Result<VoronoiPartition> {
    if positions.is_empty() {
        return Err(Error::invalid("voronoi partition needs at least one site"));
    }
    let sites: Vec<Point> = positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if region.contains(p, 1e-12) {
                *p
            } else {
                let q = region.clamp(p);
                log::warn!("robot {i} at ({}, {}) lies outside the region; clamped to ({}, {})", p.x, p.y, q.x, q.y);
                q
            }
        })
        .collect();
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            if (sites[i] - sites[j]).norm() < MIN_SITE_SEPARATION {
                return Err(Error::DegenerateSites {
                    i,
                    j,
                    tol: MIN_SITE_SEPARATION,
                });
            }
        }
    }
    let cells = sites
        .iter()
        .enumerate()
        .map(|(i, pi)| {
            let mut cell = region.polygon().clone();
            for (j, pj) in sites.iter().enumerate() {
                if i != j && !cell.is_empty() {
                    let normal = pj - pi;
                    cell = cell.clip(&normal, normal.dot(&((pi + pj) / 2.0)));
                }
            }
            cell
        })
        .collect();
    Ok(VoronoiPartition { cells })
}

fn mass_and_moment(cell: &Polygon, density: &DensityField, quad: &Quadrature) -> (f64, Point) {
    if density.is_uniform() {
        let area = cell.area();
        let c = if area > 0.0 { cell.centroid() } else { Point::zeros() };
        return (area, c * area);
    }
    let [m, mx, my] = integrate(cell, quad, |q| {
        let phi = density.eval(q);
        [phi, q.x * phi, q.y * phi]
    });
    (m, Point::new(mx, my))
}

/// Density-weighted centroid of a cell.
pub fn centroid(cell: &Polygon, density: &DensityField, quad: &Quadrature) -> Result<Point> {
    let (mass, moment) = mass_and_moment(cell, density, quad);
    if !(mass >= MIN_MASS) {
        return Err(Error::DegenerateMass { mass, tol: MIN_MASS });
    }
    Ok(moment / mass)
}

pub fn centroids(partition: &VoronoiPartition, density: &DensityField, quad: &Quadrature) -> Result<Vec<Point>> {
    partition.cells.iter().map(|c| centroid(c, density, quad)).collect()
}

/// `int_cell ||q - p||^2 phi(q) dq`.
pub fn cell_cost(cell: &Polygon, p: &Point, density: &DensityField, quad: &Quadrature) -> f64 {
    let sq = |q: &Point| (q - p).norm_squared();
    if density.is_uniform() {
        integrate_polynomial(cell, |q| [sq(q)])[0]
    } else {
        integrate(cell, quad, |q| [sq(q) * density.eval(q)])[0]
    }
}

/// Locational cost `H = sum_i int_{W_i} ||q - p_i||^2 phi(q) dq`.
pub fn coverage_cost(
    positions: &[Point],
    partition: &VoronoiPartition,
    density: &DensityField,
    quad: &Quadrature,
) -> Result<f64> {
    if positions.len() != partition.cells.len() {
        return Err(Error::invalid(format!(
            "{} positions for {} cells",
            positions.len(),
            partition.cells.len()
        )));
    }
    Ok(positions
        .iter()
        .zip(&partition.cells)
        .map(|(p, cell)| cell_cost(cell, p, density, quad))
        .sum())
}

/// Partitions, then evaluates `H` at the given positions.
pub fn coverage_cost_at(positions: &[Point], region: &ConvexRegion, density: &DensityField, quad: &Quadrature) -> Result<f64> {
    let partition = voronoi_partition(positions, region)?;
    coverage_cost(positions, &partition, density, quad)
}

/// One Lloyd iteration: every robot jumps to the centroid of its cell.
pub fn lloyd_step(positions: &[Point], region: &ConvexRegion, density: &DensityField, quad: &Quadrature) -> Result<Vec<Point>> {
    centroids(&voronoi_partition(positions, region)?, density, quad)
}

/// The partition is recomputed when no robot's tracking error grew since the
/// last update and either one of them strictly shrank or all have converged.
pub fn partition_update_due(positions: &[Point], references: &[Point], errors: &[f64]) -> bool {
    assert!(
        positions.len() == references.len() && references.len() == errors.len(),
        "partition_update_due: length mismatch"
    );
    let current: Vec<f64> = positions.iter().zip(references).map(|(p, r)| (p - r).norm()).collect();
    let none_grew = current.iter().zip(errors).all(|(c, e)| c <= e);
    let one_shrank = current.iter().zip(errors).any(|(c, e)| c < e);
    let converged = errors.iter().all(|&e| e <= CONVERGENCE_TOL);
    none_grew && (one_shrank || converged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[[f64; 2]]) -> Vec<Point> {
        v.iter().map(|p| Point::new(p[0], p[1])).collect()
    }

    /// Midpoint-rule sums over an `m x m` grid on the unit square, restricted
    /// to a cell: returns (mass, first moment, second moment about `p`).
    fn grid_oracle(cell: &Polygon, density: &DensityField, p: &Point, m: usize) -> (f64, Point, f64) {
        let h = 1.0 / m as f64;
        let (mut mass, mut moment, mut cost) = (0.0, Point::zeros(), 0.0);
        for a in 0..m {
            for b in 0..m {
                let q = Point::new((a as f64 + 0.5) * h, (b as f64 + 0.5) * h);
                if cell.contains(&q, 0.0) {
                    let w = density.eval(&q) * h * h;
                    mass += w;
                    moment += q * w;
                    cost += (q - p).norm_squared() * w;
                }
            }
        }
        (mass, moment, cost)
    }

    #[test]
    fn one_robot_owns_the_region() {
        let sq = ConvexRegion::unit_square();
        let part = voronoi_partition(&pts(&[[0.3, 0.3]]), &sq).unwrap();
        assert!((part.cells[0].area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_robots_split_at_bisector() {
        let sq = ConvexRegion::unit_square();
        let part = voronoi_partition(&pts(&[[0.25, 0.5], [0.75, 0.5]]), &sq).unwrap();
        for (cell, lo) in part.cells.iter().zip([0.0, 0.5]) {
            assert!((cell.area() - 0.5).abs() < 1e-15);
            assert!(cell.vertices.iter().all(|v| v.x >= lo - 1e-15 && v.x <= lo + 0.5 + 1e-15));
        }
    }

    #[test]
    fn three_robots_tile() {
        let sq = ConvexRegion::unit_square();
        let part = voronoi_partition(&pts(&[[0.1, 0.2], [0.8, 0.4], [0.4, 0.9]]), &sq).unwrap();
        assert!((part.total_area() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn duplicate_sites_rejected() {
        let sq = ConvexRegion::unit_square();
        let err = voronoi_partition(&pts(&[[0.5, 0.5], [0.5, 0.5 + 1e-9]]), &sq).unwrap_err();
        assert!(matches!(err, Error::DegenerateSites { i: 0, j: 1, .. }));
    }

    #[test]
    fn outside_sites_are_clamped() {
        let sq = ConvexRegion::unit_square();
        let part = voronoi_partition(&pts(&[[-1.0, 0.5], [0.75, 0.5]]), &sq).unwrap();
        assert!((part.total_area() - 1.0).abs() < 1e-12);
        assert!((part.cells[0].area() - 0.375).abs() < 1e-12);
    }

    #[test]
    fn uniform_centroids() {
        let q = Quadrature::default();
        let sq = ConvexRegion::unit_square();
        let c = centroid(sq.polygon(), &DensityField::Uniform, &q).unwrap();
        assert!((c - Point::new(0.5, 0.5)).norm() < 1e-15);
        let tri = Polygon::new(pts(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]));
        let c = centroid(&tri, &DensityField::Uniform, &q).unwrap();
        assert!((c - Point::new(1.0 / 3.0, 1.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn gaussian_centroid_matches_grid() {
        let sq = ConvexRegion::unit_square();
        let d = DensityField::gaussian([0.7, 0.7], 0.2);
        let c = centroid(sq.polygon(), &d, &Quadrature::default()).unwrap();
        let (mass, moment, _) = grid_oracle(sq.polygon(), &d, &Point::zeros(), 400);
        let oracle = moment / mass;
        assert!((c - oracle).abs().max() < 1e-4, "{c:?} vs {oracle:?}");
    }

    #[test]
    fn gaussian_cost_matches_grid_on_cells() {
        let sq = ConvexRegion::unit_square();
        let d = DensityField::gaussian([0.3, 0.6], 0.25);
        let p = pts(&[[0.2, 0.2], [0.8, 0.3], [0.5, 0.8]]);
        let part = voronoi_partition(&p, &sq).unwrap();
        for (cell, pi) in part.cells.iter().zip(&p) {
            let (_, _, oracle) = grid_oracle(cell, &d, pi, 400);
            let h = cell_cost(cell, pi, &d, &Quadrature::default());
            assert!((h - oracle).abs() < 1e-4 * oracle.max(1.0), "{h} vs {oracle}");
        }
    }

    #[test]
    fn degenerate_mass() {
        let sliver = Polygon::new(pts(&[[0.0, 0.0], [1e-7, 0.0], [0.0, 1e-7]]));
        let err = centroid(&sliver, &DensityField::Uniform, &Quadrature::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateMass { .. }));
    }

    #[test]
    fn single_robot_cost_at_centroid_is_one_sixth() {
        let sq = ConvexRegion::unit_square();
        let q = Quadrature::default();
        let h = coverage_cost_at(&pts(&[[0.5, 0.5]]), &sq, &DensityField::Uniform, &q).unwrap();
        assert!((h - 1.0 / 6.0).abs() < 1e-14);
        let moved = coverage_cost_at(&pts(&[[0.6, 0.45]]), &sq, &DensityField::Uniform, &q).unwrap();
        assert!(moved > h);
        // variance decomposition: H(p) = H(c) + mass * ||p - c||^2
        assert!((moved - (h + 0.0125)).abs() < 1e-14);
    }

    #[test]
    fn update_criterion() {
        let p = pts(&[[0.0, 0.0], [1.0, 1.0]]);
        assert!(partition_update_due(&p, &p, &[0.0, 0.0]));
        let r = pts(&[[0.25, 0.0], [1.0, 1.5]]);
        assert!(!partition_update_due(&p, &r, &[0.125, 0.75]));
        assert!(partition_update_due(&p, &r, &[0.375, 0.75]));
        assert!(partition_update_due(&p, &r, &[0.25, 0.75]));
        assert!(!partition_update_due(&p, &r, &[0.25, 0.5]));
    }
}
