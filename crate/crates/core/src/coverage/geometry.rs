use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

/// A convex polygon with counter-clockwise vertices. May be empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Polygon { vertices }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    fn signed_area(&self) -> f64 {
        let v = &self.vertices;
        (0..v.len()).map(|k| cross(&v[k], &v[(k + 1) % v.len()])).sum::<f64>() / 2.0
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.signed_area().abs()
        }
    }

    /// Area centroid, using the shoelace formula.
    pub fn centroid(&self) -> Point {
        let v = &self.vertices;
        let origin = v[0];
        let mut acc = Point::zeros();
        let mut twice_area = 0.0;
        for k in 1..v.len() - 1 {
            let (a, b) = (v[k] - origin, v[k + 1] - origin);
            let w = cross(&a, &b);
            twice_area += w;
            acc += w * (a + b) / 3.0;
        }
        origin + acc / twice_area
    }

    /// Fan triangles `(v0, vk, vk+1)`.
    pub fn triangles(&self) -> impl Iterator<Item = [Point; 3]> + '_ {
        let v = &self.vertices;
        (1..v.len().saturating_sub(1)).map(move |k| [v[0], v[k], v[k + 1]])
    }

    /// True when `p` is inside or within `tol` of the boundary.
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        let v = &self.vertices;
        (0..v.len()).all(|k| {
            let (a, b) = (v[k], v[(k + 1) % v.len()]);
            let edge = b - a;
            cross(&edge, &(p - a)) >= -tol * edge.norm()
        })
    }

    /// Keeps the part with `normal . q <= offset`.
    pub fn clip(&self, normal: &Point, offset: f64) -> Polygon {
        let v = &self.vertices;
        let mut out: Vec<Point> = Vec::with_capacity(v.len() + 1);
        let side = |q: &Point| normal.dot(q) - offset;
        for k in 0..v.len() {
            let (a, b) = (v[k], v[(k + 1) % v.len()]);
            let (sa, sb) = (side(&a), side(&b));
            if sa <= 0.0 {
                out.push(a);
            }
            if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
                let t = sa / (sa - sb);
                out.push(a + t * (b - a));
            }
        }
        out.dedup_by(|a, b| (*a - *b).norm() < 1e-14);
        if out.len() > 1 && (out[0] - out[out.len() - 1]).norm() < 1e-14 {
            out.pop();
        }
        if out.len() < 3 {
            out.clear();
        }
        Polygon { vertices: out }
    }

    /// Closest point of the polygon to `p`.
    pub fn closest_point(&self, p: &Point) -> Point {
        if self.contains(p, 0.0) {
            return *p;
        }
        let v = &self.vertices;
        let mut best = v[0];
        let mut best_d = f64::INFINITY;
        for k in 0..v.len() {
            let (a, b) = (v[k], v[(k + 1) % v.len()]);
            let edge = b - a;
            let t = ((p - a).dot(&edge) / edge.norm_squared()).clamp(0.0, 1.0);
            let q = a + t * edge;
            let d = (p - q).norm();
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }

    /// Outward half-planes `(normal, offset)` with the polygon equal to
    /// `{q : normal . q <= offset}` for all of them; normals have unit length.
    pub fn half_planes(&self) -> Vec<(Point, f64)> {
        let v = &self.vertices;
        (0..v.len())
            .map(|k| {
                let (a, b) = (v[k], v[(k + 1) % v.len()]);
                let e = (b - a).normalize();
                let normal = Point::new(e.y, -e.x);
                (normal, normal.dot(&a))
            })
            .collect()
    }
}

/// The convex workspace. Vertices are stored counter-clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionJson", into = "RegionJson")]
pub struct ConvexRegion {
    polygon: Polygon,
}

#[derive(Serialize, Deserialize)]
struct RegionJson {
    vertices: Vec<[f64; 2]>,
}

impl TryFrom<RegionJson> for ConvexRegion {
    type Error = Error;

    fn try_from(r: RegionJson) -> Result<Self> {
        ConvexRegion::new(r.vertices.iter().map(|v| Point::new(v[0], v[1])).collect())
    }
}

impl From<ConvexRegion> for RegionJson {
    fn from(r: ConvexRegion) -> Self {
        RegionJson {
            vertices: r.polygon.vertices.iter().map(|v| [v.x, v.y]).collect(),
        }
    }
}

impl ConvexRegion {
    /// Accepts either orientation; rejects non-convex or zero-area input.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid("a region needs at least 3 vertices"));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::invalid("region has non-finite vertices"));
        }
        let mut poly = Polygon::new(vertices.clone());
        let area = poly.signed_area();
        let scale = vertices.iter().map(|v| v.norm()).fold(1.0, f64::max);
        if area.abs() <= 1e-12 * scale * scale {
            return Err(Error::invalid("region has zero area"));
        }
        if area < 0.0 {
            vertices.reverse();
            poly = Polygon::new(vertices);
        }
        let v = &poly.vertices;
        for k in 0..v.len() {
            let (a, b, c) = (v[k], v[(k + 1) % v.len()], v[(k + 2) % v.len()]);
            if cross(&(b - a), &(c - b)) < -1e-12 * scale * scale {
                return Err(Error::invalid(format!("region is not convex at vertex {}", (k + 1) % v.len())));
            }
        }
        Ok(ConvexRegion { polygon: poly })
    }

    pub fn rectangle(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        ConvexRegion::new(vec![
            Point::new(xmin, ymin),
            Point::new(xmax, ymin),
            Point::new(xmax, ymax),
            Point::new(xmin, ymax),
        ])
    }

    pub fn unit_square() -> Self {
        Self::rectangle(0.0, 0.0, 1.0, 1.0).expect("valid square")
    }

    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    pub fn area(&self) -> f64 {
        self.polygon.area()
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.polygon.contains(p, tol)
    }

    pub fn clamp(&self, p: &Point) -> Point {
        self.polygon.closest_point(p)
    }

    pub fn half_planes(&self) -> Vec<(Point, f64)> {
        self.polygon.half_planes()
    }

    /// Points at distance at least `eps` from every edge line.
    pub fn shrink(&self, eps: f64) -> Result<ConvexRegion> {
        if eps < 0.0 {
            return Err(Error::invalid(format!("shrink margin must be non-negative, got {eps}")));
        }
        let mut poly = self.polygon.clone();
        for (normal, offset) in self.half_planes() {
            poly = poly.clip(&normal, offset - eps);
        }
        if poly.is_empty() || poly.area() <= 0.0 {
            return Err(Error::invalid(format!("region is empty after shrinking by {eps}")));
        }
        Ok(ConvexRegion { polygon: poly })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_basics() {
        let sq = ConvexRegion::unit_square();
        assert!((sq.area() - 1.0).abs() < 1e-15);
        assert!((sq.polygon().centroid() - Point::new(0.5, 0.5)).norm() < 1e-15);
        assert!(sq.contains(&Point::new(0.5, 1.0), 1e-12));
        assert!(!sq.contains(&Point::new(0.5, 1.01), 1e-12));
        assert_eq!(sq.clamp(&Point::new(1.5, 0.5)), Point::new(1.0, 0.5));
        assert_eq!(sq.clamp(&Point::new(2.0, -1.0)), Point::new(1.0, 0.0));
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let r = ConvexRegion::new(vec![Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)]).unwrap();
        assert!(r.polygon().signed_area() > 0.0);
    }

    #[test]
    fn bad_regions() {
        let concave = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 0.5),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        assert!(ConvexRegion::new(concave).is_err());
        assert!(ConvexRegion::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)]).is_err());
    }

    #[test]
    fn clip_square_in_half() {
        let sq = ConvexRegion::unit_square();
        let left = sq.polygon().clip(&Point::new(1.0, 0.0), 0.5);
        assert!((left.area() - 0.5).abs() < 1e-15);
        let none = sq.polygon().clip(&Point::new(1.0, 0.0), -0.5);
        assert!(none.is_empty());
    }

    #[test]
    fn shrink_square() {
        let inner = ConvexRegion::unit_square().shrink(0.1).unwrap();
        assert!((inner.area() - 0.64).abs() < 1e-14);
        assert!(ConvexRegion::unit_square().shrink(0.6).is_err());
    }
}
