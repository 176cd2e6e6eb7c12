//! Closed-loop coverage simulation: partition updates, per-robot MPC solves,
//! fault injection and rigidity recovery.

mod config;
mod export;

use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bearing::{is_infinitesimally_bearing_rigid, rigidity_rank, Configuration, Framework, DEFAULT_RANK_TOL};
use crate::coverage::{centroids, coverage_cost, partition_update_due, voronoi_partition, ConvexRegion, Point};
use crate::dynamics::{steady_state_from_position, Dynamics, RobotModel};
use crate::error::{Error, Result};
use crate::graph::{laman_check, Edge, Graph};
use crate::mpc::{mpc_step, shift_warm_start, NeighborBearing, OcpProblem, OcpSolution};
use crate::recovery::{apply_repair, build_recovery_plan, RecoveryPlan};
use crate::terminal::{build_terminal_set, TerminalSet};

pub use config::{FaultEvent, GraphSpec, MpcConfig, RobotConfig, SimConfig, TerminalConfig};
pub use export::{export, format_g};

/// Environment variable capping the number of solver threads (0 = serial).
pub const THREADS_ENV: &str = "RIGID_COVERAGE_THREADS";

/// State of the loop at one time step, recorded before the inputs are applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    /// Original ids of the robots still active, in current index order.
    pub robots: Vec<usize>,
    pub states: Vec<Vec<f64>>,
    pub positions: Vec<[f64; 2]>,
    /// Centroid references in force for this step's solves.
    pub references: Vec<[f64; 2]>,
    /// Tracking errors stored at the last partition update.
    pub errors: Vec<f64>,
    /// Desired bearings in canonical edge order, with the edges they belong to.
    pub edges: Vec<Edge>,
    pub bearings: Vec<[f64; 2]>,
    pub inputs: Vec<Vec<f64>>,
    /// Optimal OCP cost per robot.
    pub costs: Vec<f64>,
    pub solver_iterations: Vec<usize>,
    pub coverage_cost: f64,
    /// `sum ||g_achieved - g_desired||^2` over the edges.
    pub bearing_error: f64,
    /// `None` when two adjacent robots coincide.
    pub rigidity_rank: Option<usize>,
    /// The partition and references were recomputed at this step.
    pub updated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryEvent {
    pub step: usize,
    /// Original id of the lost robot.
    pub lost: usize,
    /// Recovery edges in original robot ids.
    pub new_edges: Vec<Edge>,
    pub contraction_vertex: Option<usize>,
    pub laman: bool,
    /// Rigidity of the repaired framework at the robots' positions.
    pub ibr: bool,
    /// Repaired graph in current indices.
    pub graph: Graph,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub records: Vec<StepRecord>,
    pub events: Vec<RecoveryEvent>,
    /// States after the last step.
    pub final_states: Vec<Vec<f64>>,
    pub final_robots: Vec<usize>,
    pub final_graph: Graph,
}

impl SimTrace {
    pub fn update_count(&self) -> usize {
        self.records.iter().filter(|r| r.updated).count()
    }

    /// Coverage cost at every partition update, in time order.
    pub fn costs_at_updates(&self) -> Vec<(usize, f64)> {
        self.records.iter().filter(|r| r.updated).map(|r| (r.k, r.coverage_cost)).collect()
    }

    pub fn final_positions(&self) -> Vec<Point> {
        self.final_states.iter().map(|x| Point::new(x[0], x[1])).collect()
    }
}

fn to_point(v: &DVector<f64>) -> Point {
    Point::new(v[0], v[1])
}

fn arr(p: &Point) -> [f64; 2] {
    [p.x, p.y]
}

/// Unit bearing from `i` to `j`, in canonical edge order.
fn bearings_of(points: &[Point], graph: &Graph) -> Result<Vec<Point>> {
    graph
        .edges()
        .map(|(i, j)| {
            let d = points[j] - points[i];
            let n = d.norm();
            if n <= crate::bearing::SEPARATION_TOL {
                Err(Error::DegenerateEdge { i, j, tol: crate::bearing::SEPARATION_TOL })
            } else {
                Ok(d / n)
            }
        })
        .collect()
}

struct Robot {
    id: usize,
    model: RobotModel,
    terminal: usize,
    x: DVector<f64>,
    warm: Option<OcpSolution>,
}

struct Loop<'a> {
    cfg: &'a SimConfig,
    setpoints: ConvexRegion,
    terminals: Vec<TerminalSet>,
    robots: Vec<Robot>,
    graph: Graph,
    plan: RecoveryPlan,
    references: Vec<Point>,
    errors: Vec<f64>,
    desired: Vec<Point>,
}

impl Loop<'_> {
    fn positions(&self) -> Vec<Point> {
        self.robots.iter().map(|r| to_point(&r.model.position(&r.x))).collect()
    }

    /// Algorithm line "update r, g, e" at the current positions.
    fn update_partition(&mut self) -> Result<()> {
        let p = self.positions();
        let partition = voronoi_partition(&p, &self.cfg.region)?;
        self.references = centroids(&partition, &self.cfg.density, &self.cfg.quadrature)?;
        self.errors = p.iter().zip(&self.references).map(|(a, b)| (a - b).norm()).collect();
        self.desired = bearings_of(&self.references, &self.graph)?;
        Ok(())
    }

    fn problem(&self, i: usize) -> OcpProblem {
        let robot = &self.robots[i];
        let mut bearings = Vec::new();
        for (e, (a, b)) in self.graph.edges().enumerate() {
            let j = if a == i {
                b
            } else if b == i {
                a
            } else {
                continue;
            };
            bearings.push(NeighborBearing {
                neighbor: self.robots[j].id,
                bearing: self.desired[e],
                anchor: self.references[j],
            });
        }
        let bounds = robot.model.constraints();
        OcpProblem {
            model: robot.model.clone(),
            horizon: self.cfg.mpc.horizon,
            weights: self.cfg.mpc.weights(),
            terminal: self.terminals[robot.terminal].clone(),
            x0: robot.x.clone(),
            r_ref: self.references[i],
            bearings,
            setpoints: self.setpoints.clone(),
            steady_bounds: bounds.shrink(self.cfg.epsilon),
            bounds,
            solver: self.cfg.mpc.solver.clone(),
        }
    }

    fn lose(&mut self, step: usize, lost_id: usize) -> Result<RecoveryEvent> {
        let lost = self
            .robots
            .iter()
            .position(|r| r.id == lost_id)
            .ok_or_else(|| Error::Config(format!("fault at step {step}: robot {lost_id} is not active")))?;
        let repair = self
            .plan
            .for_loss(lost)
            .cloned()
            .ok_or_else(|| Error::RecoveryInfeasible { lost, reason: "no plan entry".into() })?;
        let graph = apply_repair(&self.graph, lost, &repair.new_edges)?;
        let ids: Vec<usize> = self.robots.iter().map(|r| r.id).collect();
        self.robots.remove(lost);
        self.graph = graph;
        self.plan = if self.graph.n_vertices() >= 3 {
            build_recovery_plan(&self.graph)?
        } else {
            RecoveryPlan::default()
        };
        let laman = laman_check(&self.graph)?.is_laman;
        let fw = Framework::new(self.graph.clone(), configuration(&self.positions())?)?;
        let ibr = is_infinitesimally_bearing_rigid(&fw, DEFAULT_RANK_TOL)?;
        log::info!("step {step}: robot {lost_id} lost, recovery edges {:?}, IBR {ibr}", repair.new_edges);
        Ok(RecoveryEvent {
            step,
            lost: lost_id,
            new_edges: repair.new_edges.iter().map(|&(a, b)| (ids[a], ids[b])).collect(),
            contraction_vertex: repair.contraction_vertex.map(|v| ids[v]),
            laman,
            ibr,
            graph: self.graph.clone(),
        })
    }
}

fn configuration(points: &[Point]) -> Result<Configuration> {
    Configuration::planar(&points.iter().map(arr).collect::<Vec<_>>())
}

/// Number of solver threads from [`THREADS_ENV`]; `None` uses rayon's default pool.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Runs the configured simulation, with solver parallelism from the environment.
pub fn run(cfg: &SimConfig) -> Result<SimTrace> {
    run_with_threads(cfg, threads_from_env()?)
}

/// Runs the simulation; `Some(0)` solves serially, `Some(n)` uses `n` threads.
pub fn run_with_threads(cfg: &SimConfig, threads: Option<usize>) -> Result<SimTrace> {
    cfg.validate()?;
    let pool = match threads {
        Some(n) if n > 0 => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start solver threads: {e}")))?,
        ),
        _ => None,
    };
    let serial = threads == Some(0);

    let graph = cfg.graph.resolve(cfg.seed)?;
    let plan = if graph.n_vertices() > 1 { build_recovery_plan(&graph)? } else { RecoveryPlan::default() };
    let mut models: Vec<RobotModel> = Vec::new();
    let mut robots = Vec::new();
    for (id, rc) in cfg.robots.iter().enumerate() {
        let model = rc.model.clone().unwrap_or_else(|| cfg.model.clone());
        let terminal = match models.iter().position(|m| *m == model) {
            Some(t) => t,
            None => {
                models.push(model.clone());
                models.len() - 1
            }
        };
        robots.push(Robot { id, model, terminal, x: rc.state(), warm: None });
    }
    let weights = cfg.mpc.weights();
    let terminals = models
        .iter()
        .map(|m| {
            let steady = steady_state_from_position(m, &DVector::zeros(2))?;
            build_terminal_set(m, &m.constraints(), &steady, &weights.q, &weights.r, cfg.terminal.c_fraction, &cfg.terminal.sizing)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut lp = Loop {
        cfg,
        setpoints: cfg.region.shrink(cfg.epsilon)?,
        terminals,
        robots,
        graph,
        plan,
        references: Vec::new(),
        errors: Vec::new(),
        desired: Vec::new(),
    };
    lp.update_partition()?;
    let mut faults: BTreeMap<usize, usize> = cfg.faults.iter().map(|f| (f.at_step, f.robot)).collect();
    let mut trace = SimTrace::default();

    for k in 0..cfg.steps {
        let mut updated = k == 0;
        if let Some(lost) = faults.remove(&k) {
            let event = lp.lose(k, lost)?;
            trace.events.push(event);
            lp.update_partition()?;
            updated = true;
        } else if k > 0 && partition_update_due(&lp.positions(), &lp.references, &lp.errors) {
            lp.update_partition()?;
            updated = true;
        }

        let positions = lp.positions();
        let problems: Vec<OcpProblem> = (0..lp.robots.len()).map(|i| lp.problem(i)).collect();
        let candidates: Vec<Option<OcpSolution>> = problems
            .iter()
            .zip(&lp.robots)
            .map(|(p, r)| r.warm.as_ref().map(|w| shift_warm_start(w, p)))
            .collect();
        for ((p, c), r) in problems.iter().zip(&candidates).zip(&lp.robots) {
            if let Some(c) = c {
                p.check_feasible(c).map_err(|detail| Error::RecursiveFeasibility { step: k, robot: r.id, detail })?;
            }
        }
        let solve = |(p, c): (&OcpProblem, &Option<OcpSolution>)| mpc_step(p, c.as_ref());
        let solved: Vec<Result<(DVector<f64>, OcpSolution)>> = if serial {
            problems.iter().zip(&candidates).map(solve).collect()
        } else if let Some(pool) = &pool {
            pool.install(|| problems.par_iter().zip(&candidates).map(solve).collect())
        } else {
            problems.par_iter().zip(&candidates).map(solve).collect()
        };
        let solved = solved.into_iter().collect::<Result<Vec<_>>>()?;

        let partition = voronoi_partition(&positions, &cfg.region)?;
        let coverage = coverage_cost(&positions, &partition, &cfg.density, &cfg.quadrature)?;
        let (bearing_error, rank) = match bearings_of(&positions, &lp.graph) {
            Ok(_) if positions.len() < 2 => (0.0, Some(0)),
            Ok(achieved) => {
                let err = achieved.iter().zip(&lp.desired).map(|(a, d)| (a - d).norm_squared()).sum();
                let fw = Framework::new(lp.graph.clone(), configuration(&positions)?)?;
                (err, Some(rigidity_rank(&fw, DEFAULT_RANK_TOL)?.rank))
            }
            Err(_) => (f64::NAN, None),
        };
        trace.records.push(StepRecord {
            k,
            robots: lp.robots.iter().map(|r| r.id).collect(),
            states: lp.robots.iter().map(|r| r.x.iter().copied().collect()).collect(),
            positions: positions.iter().map(arr).collect(),
            references: lp.references.iter().map(arr).collect(),
            errors: lp.errors.clone(),
            edges: lp.graph.edge_list(),
            bearings: lp.desired.iter().map(arr).collect(),
            inputs: solved.iter().map(|(u, _)| u.iter().copied().collect()).collect(),
            costs: solved.iter().map(|(_, s)| s.cost).collect(),
            solver_iterations: solved.iter().map(|(_, s)| s.iterations).collect(),
            coverage_cost: coverage,
            bearing_error,
            rigidity_rank: rank,
            updated,
        });
        for (robot, (u, sol)) in lp.robots.iter_mut().zip(solved) {
            robot.x = robot.model.step(&robot.x, &u);
            robot.warm = Some(sol);
        }
    }
    trace.final_states = lp.robots.iter().map(|r| r.x.iter().copied().collect()).collect();
    trace.final_robots = lp.robots.iter().map(|r| r.id).collect();
    trace.final_graph = lp.graph;
    Ok(trace)
}
