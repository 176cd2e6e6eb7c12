//! Bearing functions, the bearing rigidity matrix and its rank test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

/// Relative singular-value threshold used for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Edges shorter than this are treated as degenerate.
pub const SEPARATION_TOL: f64 = 1e-9;

/// `n` points in `R^d`, stored stacked as `[p_1; ...; p_n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
}

impl Configuration {
    pub fn new(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(Error::invalid(format!("point {i} has {} coordinates, expected {dim}", p.len())));
        }
        Self::from_stacked(dim, points.concat())
    }

    pub fn planar(points: &[[f64; 2]]) -> Result<Self> {
        Self::from_stacked(2, points.iter().flatten().copied().collect())
    }

    pub fn from_stacked(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid("stacked coordinates are not a multiple of the dimension"));
        }
        if coords.len() / dim < 2 {
            return Err(Error::invalid("a configuration needs at least 2 points"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("configuration has non-finite coordinates"));
        }
        Ok(Configuration { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.coords.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    fn edge_vector(&self, i: usize, j: usize) -> DVector<f64> {
        DVector::from_iterator(self.dim, self.point(j).iter().zip(self.point(i)).map(|(b, a)| b - a))
    }
}

/// A graph together with one position per vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameworkJson", into = "FrameworkJson")]
pub struct Framework {
    graph: Graph,
    config: Configuration,
}

#[derive(Serialize, Deserialize)]
struct FrameworkJson {
    n: usize,
    edges: Vec<[usize; 2]>,
    dim: usize,
    positions: Vec<Vec<f64>>,
}

impl TryFrom<FrameworkJson> for Framework {
    type Error = Error;

    fn try_from(v: FrameworkJson) -> Result<Self> {
        let graph = Graph::from_edges(v.n, v.edges.iter().map(|e| (e[0], e[1])))?;
        Framework::new(graph, Configuration::new(v.dim, &v.positions)?)
    }
}

impl From<Framework> for FrameworkJson {
    fn from(fw: Framework) -> Self {
        FrameworkJson {
            n: fw.graph.n_vertices(),
            edges: fw.graph.edges().map(|(i, j)| [i, j]).collect(),
            dim: fw.config.dim,
            positions: fw.config.points(),
        }
    }
}

impl Framework {
    pub fn new(graph: Graph, config: Configuration) -> Result<Self> {
        if graph.n_vertices() != config.n() {
            return Err(Error::invalid(format!(
                "graph has {} vertices but configuration has {} points",
                graph.n_vertices(),
                config.n()
            )));
        }
        for (i, j) in graph.edges() {
            if config.edge_vector(i, j).norm() < SEPARATION_TOL {
                return Err(Error::DegenerateEdge { i, j, tol: SEPARATION_TOL });
            }
        }
        Ok(Framework { graph, config })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn n(&self) -> usize {
        self.config.n()
    }

    /// `dn - d - 1`, the rank of an infinitesimally bearing rigid framework.
    pub fn trivial_rank_bound(&self) -> usize {
        let d = self.dim();
        d * self.n() - d - 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BearingVector {
    pub edge_order: Vec<Edge>,
    pub bearings: Vec<DVector<f64>>,
}

impl BearingVector {
    pub fn stacked(&self) -> DVector<f64> {
        let d = self.bearings.first().map_or(0, |b| b.len());
        DVector::from_iterator(d * self.bearings.len(), self.bearings.iter().flat_map(|b| b.iter().copied()))
    }
}

/// Unit vector from `p_i` towards `p_j`, for any ordered pair of vertices.
pub fn bearing(fw: &Framework, i: usize, j: usize) -> Result<DVector<f64>> {
    let e = fw.config.edge_vector(i, j);
    let len = e.norm();
    if len < SEPARATION_TOL {
        return Err(Error::DegenerateEdge { i, j, tol: SEPARATION_TOL });
    }
    Ok(e / len)
}

/// Stacked bearings over the canonical edge order, each oriented low to high index.
pub fn bearing_function(fw: &Framework) -> Result<BearingVector> {
    let edge_order = fw.graph.edge_list();
    let bearings = edge_order
        .iter()
        .map(|&(i, j)| bearing(fw, i, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(BearingVector { edge_order, bearings })
}

/// Orthogonal projector `I - g g^T` onto the complement of `g`.
pub fn projector(g: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::identity(g.len(), g.len()) - g * g.transpose()
}

/// Jacobian of [`bearing_function`] with respect to the stacked positions.
pub fn rigidity_matrix(fw: &Framework) -> Result<DMatrix<f64>> {
    let d = fw.dim();
    let edges = fw.graph.edge_list();
    let mut rb = DMatrix::zeros(d * edges.len(), d * fw.n());
    for (k, &(i, j)) in edges.iter().enumerate() {
        let e = fw.config.edge_vector(i, j);
        let len = e.norm();
        if len < SEPARATION_TOL {
            return Err(Error::DegenerateEdge { i, j, tol: SEPARATION_TOL });
        }
        let block = projector(&(e / len)) / len;
        rb.view_mut((k * d, j * d), (d, d)).copy_from(&block);
        rb.view_mut((k * d, i * d), (d, d)).copy_from(&(-block));
    }
    Ok(rb)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub rank: usize,
    /// Singular values in descending order, padded with zeros to `dn` entries.
    pub singular_values: Vec<f64>,
    /// `dn - d - 1`.
    pub trivial_bound: usize,
    /// Rank exceeded `dn - d - 1`, which only happens on numerical breakdown.
    pub bound_violated: bool,
}

impl RankReport {
    /// The `(dn - d - 1)`-th largest singular value: zero exactly when the
    /// framework has a non-trivial infinitesimal bearing motion.
    pub fn smallest_nontrivial_singular_value(&self) -> f64 {
        self.trivial_bound
            .checked_sub(1)
            .and_then(|k| self.singular_values.get(k).copied())
            .unwrap_or(0.0)
    }
}

pub fn rigidity_rank(fw: &Framework, tol: f64) -> Result<RankReport> {
    let rb = rigidity_matrix(fw)?;
    let cols = rb.ncols();
    let mut sv: Vec<f64> = if rb.nrows() == 0 {
        Vec::new()
    } else {
        rb.svd(false, false).singular_values.iter().copied().collect()
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.resize(cols, 0.0);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let rank = if sigma_max > 0.0 {
        sv.iter().filter(|&&s| s > tol * sigma_max).count()
    } else {
        0
    };
    let trivial_bound = fw.trivial_rank_bound();
    let bound_violated = rank > trivial_bound;
    if bound_violated {
        log::warn!("bearing rigidity rank {rank} exceeds dn - d - 1 = {trivial_bound}; numerical breakdown");
    }
    Ok(RankReport {
        rank,
        singular_values: sv,
        trivial_bound,
        bound_violated,
    })
}

pub fn is_infinitesimally_bearing_rigid(fw: &Framework, tol: f64) -> Result<bool> {
    let report = rigidity_rank(fw, tol)?;
    Ok(report.rank == report.trivial_bound)
}

/// The `d + 1` trivial bearing motions: one translation per axis and the
/// scaling about the centroid.
pub fn trivial_motions(config: &Configuration) -> Vec<DVector<f64>> {
    let (d, n) = (config.dim(), config.n());
    let mut out: Vec<DVector<f64>> = (0..d)
        .map(|axis| DVector::from_fn(d * n, |r, _| if r % d == axis { 1.0 } else { 0.0 }))
        .collect();
    let p = config.stacked();
    let centroid: Vec<f64> = (0..d)
        .map(|a| (0..n).map(|i| p[i * d + a]).sum::<f64>() / n as f64)
        .collect();
    out.push(DVector::from_fn(d * n, |r, _| p[r] - centroid[r % d]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fw(points: &[[f64; 2]], edges: &[(usize, usize)]) -> Framework {
        Framework::new(
            Graph::from_edges(points.len(), edges.iter().copied()).unwrap(),
            Configuration::planar(points).unwrap(),
        )
        .unwrap()
    }

    /// Central-difference Jacobian of the stacked bearings.
    fn fd_jacobian(f: &Framework, step: f64) -> DMatrix<f64> {
        let p = f.config().stacked();
        let m = f.graph().edge_count() * f.dim();
        let mut jac = DMatrix::zeros(m, p.len());
        for c in 0..p.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[c] += step;
            minus[c] -= step;
            let fp = Framework::new(f.graph().clone(), Configuration::from_stacked(f.dim(), plus.as_slice().to_vec()).unwrap()).unwrap();
            let fm = Framework::new(f.graph().clone(), Configuration::from_stacked(f.dim(), minus.as_slice().to_vec()).unwrap()).unwrap();
            let col = (bearing_function(&fp).unwrap().stacked() - bearing_function(&fm).unwrap().stacked()) / (2.0 * step);
            jac.set_column(c, &col);
        }
        jac
    }

    #[test]
    fn unit_bearings() {
        let f = fw(&[[0.0, 0.0], [1.0, 0.0]], &[(0, 1)]);
        let b = bearing_function(&f).unwrap();
        assert_eq!(b.bearings[0].as_slice(), &[1.0, 0.0]);
        assert_eq!(bearing(&f, 1, 0).unwrap().as_slice(), &[-1.0, 0.0]);

        let f = fw(&[[0.0, 0.0], [3.0, 4.0]], &[(0, 1)]);
        let g = &bearing_function(&f).unwrap().bearings[0];
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn coincident_endpoints_rejected() {
        let err = Framework::new(
            Graph::from_edges(2, [(0, 1)]).unwrap(),
            Configuration::planar(&[[0.5, 0.5], [0.5, 0.5]]).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateEdge { i: 0, j: 1, .. }));
    }

    #[test]
    fn two_point_matrix_blocks() {
        let f = fw(&[[0.0, 0.0], [1.0, 0.0]], &[(0, 1)]);
        let rb = rigidity_matrix(&f).unwrap();
        let expected = DMatrix::from_row_slice(2, 4, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0]);
        assert_eq!(rb, expected);
        let fd = fd_jacobian(&f, 1e-6);
        assert!((rb - fd).abs().max() < 1e-6);
    }

    #[test]
    fn trivial_motions_in_null_space() {
        let f = fw(&[[0.1, 0.2], [0.9, 0.3], [0.4, 0.8], [0.7, 0.7]], &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]);
        let rb = rigidity_matrix(&f).unwrap();
        for v in trivial_motions(f.config()) {
            assert!((&rb * &v).norm() <= 1e-9 * v.norm());
        }
    }

    #[test]
    fn ranks_of_small_frameworks() {
        let two = fw(&[[0.0, 0.0], [1.0, 0.0]], &[(0, 1)]);
        let r = rigidity_rank(&two, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((r.rank, r.trivial_bound), (1, 1));
        assert!(is_infinitesimally_bearing_rigid(&two, DEFAULT_RANK_TOL).unwrap());

        let tri = fw(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(rigidity_rank(&tri, DEFAULT_RANK_TOL).unwrap().rank, 3);
        assert!(is_infinitesimally_bearing_rigid(&tri, DEFAULT_RANK_TOL).unwrap());

        let collinear = fw(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], &[(0, 1), (1, 2)]);
        assert!(rigidity_rank(&collinear, DEFAULT_RANK_TOL).unwrap().rank < 3);

        let path = fw(&[[0.0, 0.0], [1.0, 0.2], [0.3, 1.1]], &[(0, 1), (1, 2)]);
        let r = rigidity_rank(&path, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.rank, 2);
        assert!(!is_infinitesimally_bearing_rigid(&path, DEFAULT_RANK_TOL).unwrap());
        assert!(r.smallest_nontrivial_singular_value() < 1e-12);
    }

    #[test]
    fn flipping_orientation_negates_bearing() {
        let f = fw(&[[0.2, 0.1], [0.7, 0.9], [0.9, 0.2]], &[(0, 1), (0, 2), (1, 2)]);
        for (i, j) in f.graph().edges() {
            assert_eq!(bearing(&f, i, j).unwrap(), -bearing(&f, j, i).unwrap());
        }
    }

    #[test]
    fn framework_json_round_trip() {
        let json = r#"{"n":3,"edges":[[0,1],[0,2],[1,2]],"dim":2,"positions":[[0,0],[1,0],[0,1]]}"#;
        let f: Framework = serde_json::from_str(json).unwrap();
        assert_eq!(f.n(), 3);
        let back: Framework = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }
}
