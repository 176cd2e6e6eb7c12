use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::coverage::{ConvexRegion, DensityField, GaussianComponent, Point, Quadrature, MIN_SITE_SEPARATION};
use crate::dynamics::{Dynamics, RobotModel};
use crate::error::{Error, Result};
use crate::graph::{henneberg_generate, laman_check, Graph};
use crate::mpc::{CostWeights, IpmOptions};
use crate::terminal::SizingOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub position: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
    /// Overrides the shared model for this robot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<RobotModel>,
}

impl RobotConfig {
    pub fn at(x: f64, y: f64) -> Self {
        RobotConfig { position: [x, y], velocity: [0.0, 0.0], model: None }
    }

    pub fn state(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.position[0], self.position[1], self.velocity[0], self.velocity[1]])
    }
}

/// Either an explicit graph `{"n": .., "edges": [[i, j], ..]}` or a random
/// Henneberg construction `{"generate": n, "seed": s, "split_prob": p}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Generate {
        generate: usize,
        /// Defaults to the simulation seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default = "default_split")]
        split_prob: f64,
    },
    Explicit(Graph),
}

fn default_split() -> f64 {
    0.5
}

impl GraphSpec {
    pub fn resolve(&self, sim_seed: u64) -> Result<Graph> {
        match self {
            GraphSpec::Explicit(g) => Ok(g.clone()),
            GraphSpec::Generate { generate, seed, split_prob } => {
                Ok(henneberg_generate(*generate, seed.unwrap_or(sim_seed), *split_prob)?.graph)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEvent {
    pub at_step: usize,
    /// Original robot id (index in the configuration's robot list).
    pub robot: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub horizon: usize,
    pub mu: f64,
    /// Stage weights as row lists.
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub s_r: [[f64; 2]; 2],
    pub w_b: f64,
    pub solver: IpmOptions,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 10,
            mu: 1.0,
            q: diag(&[1e-3, 1e-3, 1e-4, 1e-4]),
            r: diag(&[1e-5, 1e-5]),
            s_r: [[1.0, 0.0], [0.0, 1.0]],
            w_b: 10.0,
            solver: IpmOptions::default(),
        }
    }
}

fn diag(d: &[f64]) -> Vec<Vec<f64>> {
    (0..d.len())
        .map(|i| (0..d.len()).map(|j| if i == j { d[i] } else { 0.0 }).collect())
        .collect()
}

fn matrix(name: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("{name} must be a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl MpcConfig {
    /// Panics on malformed matrices; call [`SimConfig::validate`] first.
    pub fn weights(&self) -> CostWeights {
        self.try_weights().expect("validated MPC weights")
    }

    fn try_weights(&self) -> Result<CostWeights> {
        Ok(CostWeights {
            q: matrix("mpc.q", &self.q, 4)?,
            r: matrix("mpc.r", &self.r, 2)?,
            s_r: Matrix2::new(self.s_r[0][0], self.s_r[0][1], self.s_r[1][0], self.s_r[1][1]),
            w_b: self.w_b,
            mu: self.mu,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminalConfig {
    /// `c` as a fraction of its upper bound `1 - rho(A_K)^2`.
    pub c_fraction: f64,
    pub sizing: SizingOptions,
}

impl Default for TerminalConfig {
    fn default() -> Self {
        TerminalConfig { c_fraction: 0.5, sizing: SizingOptions::default() }
    }
}

/// Full simulation setup. Every field has a default; the defaults describe
/// six robots starting in a corner of the unit square with a Gaussian
/// density peaked in the opposite corner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub region: ConvexRegion,
    pub density: DensityField,
    pub quadrature: Quadrature,
    pub model: RobotModel,
    pub robots: Vec<RobotConfig>,
    pub graph: GraphSpec,
    pub mpc: MpcConfig,
    pub terminal: TerminalConfig,
    pub faults: Vec<FaultEvent>,
    pub steps: usize,
    pub seed: u64,
    /// Inward margin of the admissible reference set.
    pub epsilon: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            region: ConvexRegion::unit_square(),
            density: DensityField::GaussianMixture {
                components: vec![GaussianComponent { mean: [0.7, 0.7], variance: [0.04, 0.04], weight: 1.0 }],
                floor: 0.1,
            },
            quadrature: Quadrature { tol: 1e-10, max_level: 8 },
            model: RobotModel::default(),
            robots: [[0.1, 0.1], [0.3, 0.1], [0.1, 0.3], [0.3, 0.3], [0.2, 0.45], [0.45, 0.2]]
                .iter()
                .map(|p| RobotConfig::at(p[0], p[1]))
                .collect(),
            graph: GraphSpec::Generate { generate: 6, seed: None, split_prob: 0.5 },
            mpc: MpcConfig::default(),
            terminal: TerminalConfig::default(),
            faults: Vec::new(),
            steps: 150,
            seed: 0,
            epsilon: 0.01,
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid simulation config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.density.validate()?;
        self.model.validate()?;
        let n = self.robots.len();
        if n == 0 {
            return Err(Error::Config("at least one robot is required".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        self.region.shrink(self.epsilon)?;
        for (i, rc) in self.robots.iter().enumerate() {
            let model = rc.model.as_ref().unwrap_or(&self.model);
            model.validate()?;
            let p = Point::new(rc.position[0], rc.position[1]);
            if !self.region.contains(&p, 0.0) {
                return Err(Error::Config(format!("robot {i} starts outside the region at {:?}", rc.position)));
            }
            if !model.constraints().contains_state(&rc.state(), 0.0) {
                return Err(Error::Config(format!("robot {i} starts with a velocity beyond its bound")));
            }
            if model.state_dim() != 4 {
                return Err(Error::Config(format!("robot {i}: unsupported model")));
            }
            for (j, other) in self.robots.iter().enumerate().take(i) {
                let q = Point::new(other.position[0], other.position[1]);
                if (p - q).norm() <= MIN_SITE_SEPARATION {
                    return Err(Error::Config(format!("robots {j} and {i} start at the same position")));
                }
            }
        }
        let graph = self.graph.resolve(self.seed)?;
        if graph.n_vertices() != n {
            return Err(Error::Config(format!(
                "graph has {} vertices but there are {n} robots",
                graph.n_vertices()
            )));
        }
        if n == 1 && graph.edge_count() > 0 {
            return Err(Error::Config("a single robot cannot have edges".into()));
        }
        if n > 1 {
            let verdict = laman_check(&graph)?;
            if !verdict.is_laman {
                return Err(Error::Config(match verdict.violating_subset {
                    Some(s) => format!("graph is not minimally rigid: vertex subset {s:?} spans too many edges"),
                    None => format!("graph is not minimally rigid: {} edges, expected {}", graph.edge_count(), 2 * n - 3),
                }));
            }
        }
        if self.mpc.horizon == 0 {
            return Err(Error::Config("mpc.horizon must be at least 1".into()));
        }
        self.mpc.try_weights()?.validate(4, 2)?;
        let mut lost = Vec::new();
        let mut steps: Vec<usize> = Vec::new();
        for f in &self.faults {
            if f.robot >= n || lost.contains(&f.robot) {
                return Err(Error::Config(format!("fault at step {} names robot {}, which cannot be lost", f.at_step, f.robot)));
            }
            if steps.contains(&f.at_step) {
                return Err(Error::Config(format!("more than one fault at step {}", f.at_step)));
            }
            if f.at_step == 0 {
                return Err(Error::Config("faults at step 0 are not supported".into()));
            }
            lost.push(f.robot);
            steps.push(f.at_step);
        }
        if n - lost.len() < 2 && !lost.is_empty() {
            return Err(Error::Config("faults would leave fewer than two robots".into()));
        }
        Ok(())
    }
}
