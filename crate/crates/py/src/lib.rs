use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rigid_coverage::bearing::{rigidity_rank as rank_of, Configuration, Framework, DEFAULT_RANK_TOL};
use rigid_coverage::coverage::{self, ConvexRegion, DensityField, Point, Quadrature};
use rigid_coverage::error::Error;
use rigid_coverage::graph::{self, henneberg_generate, laman_check};
use rigid_coverage::recovery::{apply_repair, closing_ranks};
use rigid_coverage::sim::{self, SimConfig, SimTrace};

fn py_err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn points(raw: &[[f64; 2]]) -> Vec<Point> {
    raw.iter().map(|p| Point::new(p[0], p[1])).collect()
}

/// Undirected simple graph on vertices `0..n`.
#[pyclass(name = "Graph", module = "rigid_coverage", from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: graph::Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(PyGraph { inner: graph::Graph::from_edges(n, edges).map_err(py_err)? })
    }

    /// Random minimally rigid graph from Henneberg moves.
    #[staticmethod]
    #[pyo3(signature = (n, seed = 0, split_prob = 0.5))]
    fn generate(n: usize, seed: u64, split_prob: f64) -> PyResult<Self> {
        Ok(PyGraph { inner: henneberg_generate(n, seed, split_prob).map_err(py_err)?.graph })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyGraph { inner: serde_json::from_str(text).map_err(json_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edge_list()
    }

    fn degree(&self, v: usize) -> usize {
        self.inner.degree(v)
    }

    fn is_laman(&self) -> PyResult<bool> {
        Ok(laman_check(&self.inner).map_err(py_err)?.is_laman)
    }

    /// `(new_edges, contraction_vertex)` restoring minimal rigidity after `lost` is removed.
    fn repair(&self, lost: usize) -> PyResult<(Vec<(usize, usize)>, Option<usize>)> {
        let r = closing_ranks(&self.inner, lost).map_err(py_err)?;
        Ok((r.new_edges, r.contraction_vertex))
    }

    /// The graph on the survivors after `lost` is removed and repaired.
    fn without(&self, lost: usize) -> PyResult<Self> {
        let r = closing_ranks(&self.inner, lost).map_err(py_err)?;
        Ok(PyGraph { inner: apply_repair(&self.inner, lost, &r.new_edges).map_err(py_err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.n_vertices()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={:?})", self.inner.n_vertices(), self.inner.edge_list())
    }
}

fn framework(g: &PyGraph, positions: &[[f64; 2]]) -> PyResult<Framework> {
    let config = Configuration::planar(positions).map_err(py_err)?;
    Framework::new(g.inner.clone(), config).map_err(py_err)
}

/// Rank of the bearing rigidity matrix of a planar framework.
#[pyfunction]
#[pyo3(signature = (graph, positions, tol = DEFAULT_RANK_TOL))]
fn rigidity_rank(graph: &PyGraph, positions: Vec<[f64; 2]>, tol: f64) -> PyResult<usize> {
    Ok(rank_of(&framework(graph, &positions)?, tol).map_err(py_err)?.rank)
}

/// Whether the framework is infinitesimally bearing rigid.
#[pyfunction]
#[pyo3(signature = (graph, positions, tol = DEFAULT_RANK_TOL))]
fn is_rigid(graph: &PyGraph, positions: Vec<[f64; 2]>, tol: f64) -> PyResult<bool> {
    let fw = framework(graph, &positions)?;
    Ok(rank_of(&fw, tol).map_err(py_err)?.rank == fw.trivial_rank_bound())
}

struct CoverageSetup {
    region: ConvexRegion,
    density: DensityField,
    quad: Quadrature,
}

fn coverage_setup(region: Option<Vec<[f64; 2]>>, density: Option<&str>) -> PyResult<CoverageSetup> {
    let region = match region {
        Some(v) => ConvexRegion::new(points(&v)).map_err(py_err)?,
        None => ConvexRegion::unit_square(),
    };
    let density: DensityField = match density {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => DensityField::Uniform,
    };
    density.validate().map_err(py_err)?;
    Ok(CoverageSetup { region, density, quad: Quadrature::default() })
}

/// Locational coverage cost `H` of robots at `positions`. `density` is a
/// JSON density description; the default is uniform over the unit square.
#[pyfunction]
#[pyo3(signature = (positions, region = None, density = None))]
fn coverage_cost(positions: Vec<[f64; 2]>, region: Option<Vec<[f64; 2]>>, density: Option<&str>) -> PyResult<f64> {
    let s = coverage_setup(region, density)?;
    coverage::coverage_cost_at(&points(&positions), &s.region, &s.density, &s.quad).map_err(py_err)
}

/// Mass centroids of the Voronoi cells of `positions`.
#[pyfunction]
#[pyo3(signature = (positions, region = None, density = None))]
fn centroids(positions: Vec<[f64; 2]>, region: Option<Vec<[f64; 2]>>, density: Option<&str>) -> PyResult<Vec<[f64; 2]>> {
    let s = coverage_setup(region, density)?;
    let c = coverage::lloyd_step(&points(&positions), &s.region, &s.density, &s.quad).map_err(py_err)?;
    Ok(c.iter().map(|p| [p.x, p.y]).collect())
}

/// Result of a closed-loop run.
#[pyclass(name = "Trace", module = "rigid_coverage")]
struct PyTrace {
    inner: SimTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn steps(&self) -> usize {
        self.inner.records.len()
    }

    #[getter]
    fn final_positions(&self) -> Vec<[f64; 2]> {
        self.inner.final_positions().iter().map(|p| [p.x, p.y]).collect()
    }

    #[getter]
    fn final_robots(&self) -> Vec<usize> {
        self.inner.final_robots.clone()
    }

    /// Coverage cost at every step.
    #[getter]
    fn coverage_costs(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.coverage_cost).collect()
    }

    /// `(step, H)` at every partition update.
    fn costs_at_updates(&self) -> Vec<(usize, f64)> {
        self.inner.costs_at_updates()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    /// Writes the CSV, JSON and gnuplot files into `dir`.
    fn export(&self, dir: &str) -> PyResult<()> {
        sim::export(&self.inner, dir).map_err(py_err)
    }
}

/// Runs a simulation from a JSON configuration; omitted fields take their
/// defaults. `threads = 0` solves serially.
#[pyfunction]
#[pyo3(signature = (config = "{}", threads = None))]
fn simulate(py: Python<'_>, config: &str, threads: Option<usize>) -> PyResult<PyTrace> {
    let cfg = SimConfig::from_json(config).map_err(py_err)?;
    let trace = py.detach(|| sim::run_with_threads(&cfg, threads)).map_err(py_err)?;
    Ok(PyTrace { inner: trace })
}

/// Checks a JSON configuration without running it.
#[pyfunction]
fn validate_config(config: &str) -> PyResult<()> {
    SimConfig::from_json(config).and_then(|c| c.validate()).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "rigid_coverage")]
fn rigid_coverage_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(rigidity_rank, m)?)?;
    m.add_function(wrap_pyfunction!(is_rigid, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_cost, m)?)?;
    m.add_function(wrap_pyfunction!(centroids, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    Ok(())
}
