//! Polygon integration with a degree-5 seven-point triangle rule and
//! uniform midpoint refinement.

use serde::{Deserialize, Serialize};

use super::geometry::{Point, Polygon};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Quadrature {
    /// Stop refining once successive estimates differ by less than this
    /// (relative to the magnitude of the estimate when it exceeds one).
    pub tol: f64,
    /// Each level splits every triangle into four.
    pub max_level: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { tol: 1e-7, max_level: 7 }
    }
}

/// Barycentric nodes `(l1, l2, l3)` and weights summing to one.
fn rule() -> [([f64; 3], f64); 7] {
    let s = 15f64.sqrt();
    let (a1, b1, w1) = ((6.0 - s) / 21.0, (9.0 + 2.0 * s) / 21.0, (155.0 - s) / 1200.0);
    let (a2, b2, w2) = ((6.0 + s) / 21.0, (9.0 - 2.0 * s) / 21.0, (155.0 + s) / 1200.0);
    let third = 1.0 / 3.0;
    [
        ([third, third, third], 9.0 / 40.0),
        ([a1, a1, b1], w1),
        ([a1, b1, a1], w1),
        ([b1, a1, a1], w1),
        ([a2, a2, b2], w2),
        ([a2, b2, a2], w2),
        ([b2, a2, a2], w2),
    ]
}

fn tri_area(t: &[Point; 3]) -> f64 {
    let (u, v) = (t[1] - t[0], t[2] - t[0]);
    0.5 * (u.x * v.y - u.y * v.x).abs()
}

fn rule_on<const K: usize>(t: &[Point; 3], f: &impl Fn(&Point) -> [f64; K], acc: &mut [f64; K]) {
    let area = tri_area(t);
    for (l, w) in rule() {
        let q = t[0] * l[0] + t[1] * l[1] + t[2] * l[2];
        let val = f(&q);
        for k in 0..K {
            acc[k] += area * w * val[k];
        }
    }
}

fn refined<const K: usize>(t: &[Point; 3], level: u32, f: &impl Fn(&Point) -> [f64; K], acc: &mut [f64; K]) {
    if level == 0 {
        rule_on(t, f, acc);
        return;
    }
    let m01 = (t[0] + t[1]) / 2.0;
    let m12 = (t[1] + t[2]) / 2.0;
    let m20 = (t[2] + t[0]) / 2.0;
    for sub in [[t[0], m01, m20], [m01, t[1], m12], [m20, m12, t[2]], [m01, m12, m20]] {
        refined(&sub, level - 1, f, acc);
    }
}

fn at_level<const K: usize>(poly: &Polygon, level: u32, f: &impl Fn(&Point) -> [f64; K]) -> [f64; K] {
    let mut acc = [0.0; K];
    for t in poly.triangles() {
        refined(&t, level, f, &mut acc);
    }
    acc
}

/// Integrates a vector-valued function over a convex polygon.
pub fn integrate<const K: usize>(poly: &Polygon, quad: &Quadrature, f: impl Fn(&Point) -> [f64; K]) -> [f64; K] {
    if poly.is_empty() {
        return [0.0; K];
    }
    let mut prev = at_level(poly, 0, &f);
    for level in 1..=quad.max_level {
        let next = at_level(poly, level, &f);
        let converged = (0..K).all(|k| (next[k] - prev[k]).abs() <= quad.tol * next[k].abs().max(1.0));
        prev = next;
        if converged {
            return prev;
        }
    }
    log::debug!("quadrature did not reach tolerance {} after {} levels", quad.tol, quad.max_level);
    prev
}

/// Single application of the rule on each fan triangle; exact for
/// polynomials up to degree five.
pub fn integrate_polynomial<const K: usize>(poly: &Polygon, f: impl Fn(&Point) -> [f64; K]) -> [f64; K] {
    at_level(poly, 0, &f)
}
