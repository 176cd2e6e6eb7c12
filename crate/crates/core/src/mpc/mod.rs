//! Per-robot tracking MPC with an artificial steady state.
//!
//! Decision vector layout: `[u_0, x_1, u_1, x_2, ..., u_{N-1}, x_N, x_bar, u_bar]`.
//! The artificial reference is `r_bar = C x_bar`.

pub mod ipm;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::coverage::{ConvexRegion, Point};
use crate::dynamics::{linearize, steady_state_from_position, BoxConstraints, Dynamics, RobotModel};
use crate::error::{Error, Result};
use crate::terminal::TerminalSet;

pub use ipm::{IpmOptions, IpmStatus, Nlp};

/// Allowed violation of inequality constraints in accepted solutions.
pub const FEAS_TOL: f64 = 1e-8;
/// Allowed dynamics residual in accepted solutions.
pub const DYN_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    /// Stage state weight.
    pub q: DMatrix<f64>,
    /// Stage input weight.
    pub r: DMatrix<f64>,
    /// Weight of `||r_ref - r_bar||^2`.
    pub s_r: Matrix2<f64>,
    pub w_b: f64,
    /// Centroid tracking share; `1 - mu` goes to bearing maintenance.
    pub mu: f64,
}

impl CostWeights {
    pub fn validate(&self, nx: usize, nu: usize) -> Result<()> {
        if self.q.shape() != (nx, nx) || self.r.shape() != (nu, nu) {
            return Err(Error::invalid(format!("stage weights must be {nx}x{nx} and {nu}x{nu}")));
        }
        let psd = |m: &DMatrix<f64>, strict: bool| {
            let sym = (m + m.transpose()) / 2.0;
            let min = sym.symmetric_eigenvalues().min();
            (m - m.transpose()).amax() < 1e-12 && if strict { min > 0.0 } else { min >= -1e-12 }
        };
        if !psd(&self.q, false) {
            return Err(Error::invalid("Q must be symmetric positive semidefinite"));
        }
        if !psd(&self.r, true) {
            return Err(Error::invalid("R must be symmetric positive definite"));
        }
        if !psd(&DMatrix::from_column_slice(2, 2, self.s_r.as_slice()), true) {
            return Err(Error::invalid("S_r must be symmetric positive definite"));
        }
        if !(self.w_b.is_finite() && self.w_b >= 0.0) {
            return Err(Error::invalid(format!("w_b must be non-negative, got {}", self.w_b)));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::invalid(format!("mu must lie in (0, 1], got {}", self.mu)));
        }
        Ok(())
    }
}

/// A desired bearing from this robot towards neighbor `neighbor`, whose
/// reference position was `anchor` at the last partition update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborBearing {
    pub neighbor: usize,
    pub bearing: Point,
    pub anchor: Point,
}

/// `w_b sum_j ||P_g (r_bar - anchor_j)||^2`: squared distance of `r_bar`
/// from each line through a neighbor's anchor along the desired bearing.
pub fn bearing_cost(r_bar: &Point, bearings: &[NeighborBearing], w_b: f64) -> f64 {
    w_b * bearings
        .iter()
        .map(|b| {
            let d = r_bar - b.anchor;
            (d - b.bearing * b.bearing.dot(&d)).norm_squared()
        })
        .sum::<f64>()
}

fn projector(g: &Point) -> Matrix2<f64> {
    Matrix2::identity() - g * g.transpose()
}

/// The steady-state part of the cost as `r^T M r - 2 b^T r + c`.
fn offset_quadratic(r_ref: &Point, bearings: &[NeighborBearing], weights: &CostWeights) -> (Matrix2<f64>, Point, f64) {
    let mut m = weights.s_r * weights.mu;
    let mut b = weights.s_r * r_ref * weights.mu;
    let mut c = weights.mu * r_ref.dot(&(weights.s_r * r_ref));
    let wb = (1.0 - weights.mu) * weights.w_b;
    for nb in bearings {
        let pg = projector(&nb.bearing) * wb;
        m += pg;
        b += pg * nb.anchor;
        c += nb.anchor.dot(&(pg * nb.anchor));
    }
    (m, b, c)
}

/// `mu l_r(r_ref - r_bar) + (1 - mu) l_b(g, r_bar)`.
pub fn offset_cost(r_bar: &Point, r_ref: &Point, bearings: &[NeighborBearing], weights: &CostWeights) -> f64 {
    let e = r_ref - r_bar;
    weights.mu * e.dot(&(weights.s_r * e)) + (1.0 - weights.mu) * bearing_cost(r_bar, bearings, weights.w_b)
}

/// Minimizer of [`offset_cost`] over the convex polygon `setpoints`.
pub fn offset_optimum(r_ref: &Point, bearings: &[NeighborBearing], weights: &CostWeights, setpoints: &ConvexRegion) -> Point {
    let (m, b, _) = offset_quadratic(r_ref, bearings, weights);
    let free = m.lu().solve(&b).unwrap_or(*r_ref);
    if setpoints.contains(&free, 0.0) {
        return free;
    }
    // convex objective, so the constrained minimum lies on the boundary
    let f = |r: &Point| r.dot(&(m * r)) - 2.0 * b.dot(r);
    let v = &setpoints.polygon().vertices;
    let mut best = v[0];
    let mut best_val = f(&best);
    for k in 0..v.len() {
        let (a, e) = (v[k], v[(k + 1) % v.len()] - v[k]);
        let curv = e.dot(&(m * e));
        let t = if curv > 0.0 {
            ((b - m * a).dot(&e) / curv).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let cand = a + e * t;
        let val = f(&cand);
        if val < best_val {
            best_val = val;
            best = cand;
        }
    }
    best
}

/// One robot's optimal control problem at one time step.
#[derive(Clone, Debug)]
pub struct OcpProblem {
    pub model: RobotModel,
    pub horizon: usize,
    pub weights: CostWeights,
    /// Terminal ingredients; only `K`, `P` and `zeta` are used, the set is
    /// centred on the decision variable `x_bar`.
    pub terminal: TerminalSet,
    pub x0: DVector<f64>,
    pub r_ref: Point,
    pub bearings: Vec<NeighborBearing>,
    /// Admissible artificial references (the region shrunk by a margin).
    pub setpoints: ConvexRegion,
    pub bounds: BoxConstraints,
    /// Bounds on `(x_bar, u_bar)`, tighter than `bounds`.
    pub steady_bounds: BoxConstraints,
    pub solver: IpmOptions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    /// Feasible but not certified optimal.
    MaxIter,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OcpSolution {
    pub u_seq: Vec<DVector<f64>>,
    /// `x_0, ..., x_N`.
    pub x_seq: Vec<DVector<f64>>,
    pub xbar: DVector<f64>,
    pub ubar: DVector<f64>,
    pub rbar: Point,
    pub cost: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
}

struct Layout {
    nx: usize,
    nu: usize,
    horizon: usize,
}

impl Layout {
    fn u(&self, l: usize) -> usize {
        l * (self.nx + self.nu)
    }
    /// Offset of `x_l`, `l >= 1`.
    fn x(&self, l: usize) -> usize {
        (l - 1) * (self.nx + self.nu) + self.nu
    }
    fn xbar(&self) -> usize {
        self.horizon * (self.nx + self.nu)
    }
    fn ubar(&self) -> usize {
        self.xbar() + self.nx
    }
    fn len(&self) -> usize {
        self.ubar() + self.nu
    }
}

/// The OCP as a nonlinear program. The objective is an exact quadratic
/// `0.5 z^T H z + g^T z + c`.
struct OcpNlp<'a> {
    p: &'a OcpProblem,
    lay: Layout,
    h: DMatrix<f64>,
    g: DVector<f64>,
    c: f64,
    /// Linear inequalities `a . z <= b`, stored sparsely.
    lin: Vec<(Vec<(usize, f64)>, f64)>,
}

impl<'a> OcpNlp<'a> {
    fn new(p: &'a OcpProblem) -> Self {
        let (nx, nu) = (p.model.state_dim(), p.model.input_dim());
        let lay = Layout { nx, nu, horizon: p.horizon };
        let n = lay.len();
        let cm = p.model.output_matrix();
        let mut h = DMatrix::zeros(n, n);
        let mut g = DVector::zeros(n);
        let mut c = 0.0;
        // adds (L z + a)^T W (L z + a) with L given as (offset, block) pairs
        let mut add = |blocks: &[(usize, DMatrix<f64>)], a: &DVector<f64>, w: &DMatrix<f64>| {
            let mut l = DMatrix::zeros(a.len(), n);
            for (off, blk) in blocks {
                let mut view = l.view_mut((0, *off), (blk.nrows(), blk.ncols()));
                view += blk;
            }
            let lt_w = l.transpose() * w;
            h += &lt_w * &l * 2.0;
            g += &lt_w * a * 2.0;
            c += a.dot(&(w * a));
        };
        let ix = DMatrix::<f64>::identity(nx, nx);
        let iu = DMatrix::<f64>::identity(nu, nu);
        let zx = DVector::zeros(nx);
        let zu = DVector::zeros(nu);
        add(&[(lay.xbar(), -&ix)], &p.x0, &p.weights.q);
        for l in 0..p.horizon {
            if l > 0 {
                add(&[(lay.x(l), ix.clone()), (lay.xbar(), -&ix)], &zx, &p.weights.q);
            }
            add(&[(lay.u(l), iu.clone()), (lay.ubar(), -&iu)], &zu, &p.weights.r);
        }
        add(&[(lay.x(p.horizon), ix.clone()), (lay.xbar(), -&ix)], &zx, &p.terminal.p);
        let s_r = DMatrix::from_column_slice(2, 2, p.weights.s_r.as_slice()) * p.weights.mu;
        add(&[(lay.xbar(), cm.clone())], &DVector::from_column_slice((-p.r_ref).as_slice()), &s_r);
        let wb = (1.0 - p.weights.mu) * p.weights.w_b;
        if wb > 0.0 {
            for nb in &p.bearings {
                let pg = projector(&nb.bearing) * wb;
                let pg = DMatrix::from_column_slice(2, 2, pg.as_slice());
                add(&[(lay.xbar(), cm.clone())], &DVector::from_column_slice((-nb.anchor).as_slice()), &pg);
            }
        }

        let mut lin = Vec::new();
        let mut boxes = |off: usize, lo: &DVector<f64>, hi: &DVector<f64>| {
            for k in 0..lo.len() {
                if hi[k].is_finite() {
                    lin.push((vec![(off + k, 1.0)], hi[k]));
                }
                if lo[k].is_finite() {
                    lin.push((vec![(off + k, -1.0)], -lo[k]));
                }
            }
        };
        for l in 0..p.horizon {
            boxes(lay.u(l), &p.bounds.u_lo, &p.bounds.u_hi);
        }
        for l in 1..=p.horizon {
            boxes(lay.x(l), &p.bounds.x_lo, &p.bounds.x_hi);
        }
        boxes(lay.xbar(), &p.steady_bounds.x_lo, &p.steady_bounds.x_hi);
        boxes(lay.ubar(), &p.steady_bounds.u_lo, &p.steady_bounds.u_hi);
        for (normal, offset) in p.setpoints.half_planes() {
            let row: Vec<(usize, f64)> = (0..nx)
                .map(|k| (lay.xbar() + k, normal[0] * cm[(0, k)] + normal[1] * cm[(1, k)]))
                .filter(|(_, v)| *v != 0.0)
                .collect();
            lin.push((row, offset));
        }
        OcpNlp { p, lay, h, g, c, lin }
    }

    fn pack(&self, sol: &OcpSolution) -> DVector<f64> {
        let mut z = DVector::zeros(self.lay.len());
        for l in 0..self.p.horizon {
            z.rows_mut(self.lay.u(l), self.lay.nu).copy_from(&sol.u_seq[l]);
            z.rows_mut(self.lay.x(l + 1), self.lay.nx).copy_from(&sol.x_seq[l + 1]);
        }
        z.rows_mut(self.lay.xbar(), self.lay.nx).copy_from(&sol.xbar);
        z.rows_mut(self.lay.ubar(), self.lay.nu).copy_from(&sol.ubar);
        z
    }

    /// `(u_seq, x_seq, xbar, ubar)`.
    #[allow(clippy::type_complexity)]
    fn unpack(&self, z: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>, DVector<f64>, DVector<f64>) {
        let lay = &self.lay;
        let u_seq = (0..self.p.horizon).map(|l| z.rows(lay.u(l), lay.nu).into_owned()).collect();
        let mut x_seq = vec![self.p.x0.clone()];
        x_seq.extend((1..=self.p.horizon).map(|l| z.rows(lay.x(l), lay.nx).into_owned()));
        (u_seq, x_seq, z.rows(lay.xbar(), lay.nx).into_owned(), z.rows(lay.ubar(), lay.nu).into_owned())
    }

    fn state(&self, z: &DVector<f64>, l: usize) -> DVector<f64> {
        if l == 0 {
            self.p.x0.clone()
        } else {
            z.rows(self.lay.x(l), self.lay.nx).into_owned()
        }
    }

    fn terminal_error(&self, z: &DVector<f64>) -> DVector<f64> {
        z.rows(self.lay.x(self.p.horizon), self.lay.nx) - z.rows(self.lay.xbar(), self.lay.nx)
    }
}

impl Nlp for OcpNlp<'_> {
    fn num_vars(&self) -> usize {
        self.lay.len()
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.g.dot(z) + self.c
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.h * z + &self.g
    }

    fn hessian(&self, _z: &DVector<f64>, _y: &DVector<f64>, lambda: &DVector<f64>) -> DMatrix<f64> {
        let mut h = self.h.clone();
        let mu = lambda[lambda.len() - 1] * 2.0;
        let (xn, xb, nx) = (self.lay.x(self.p.horizon), self.lay.xbar(), self.lay.nx);
        let pm = &self.p.terminal.p * mu;
        for (r0, c0, sign) in [(xn, xn, 1.0), (xb, xb, 1.0), (xn, xb, -1.0), (xb, xn, -1.0)] {
            let mut view = h.view_mut((r0, c0), (nx, nx));
            view += &pm * sign;
        }
        h
    }

    fn eq(&self, z: &DVector<f64>) -> DVector<f64> {
        let (nx, nn) = (self.lay.nx, self.p.horizon);
        let mut out = DVector::zeros(nx * (nn + 1));
        for l in 0..nn {
            let u = z.rows(self.lay.u(l), self.lay.nu).into_owned();
            let next = self.state(z, l + 1) - self.p.model.step(&self.state(z, l), &u);
            out.rows_mut(l * nx, nx).copy_from(&next);
        }
        let xb = z.rows(self.lay.xbar(), nx).into_owned();
        let ub = z.rows(self.lay.ubar(), self.lay.nu).into_owned();
        out.rows_mut(nn * nx, nx).copy_from(&(&xb - self.p.model.step(&xb, &ub)));
        out
    }

    fn eq_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let (nx, nu, nn) = (self.lay.nx, self.lay.nu, self.p.horizon);
        let mut j = DMatrix::zeros(nx * (nn + 1), self.lay.len());
        for l in 0..nn {
            let u = z.rows(self.lay.u(l), nu).into_owned();
            let (a, b) = linearize(&self.p.model, &self.state(z, l), &u);
            let row = l * nx;
            j.view_mut((row, self.lay.x(l + 1)), (nx, nx)).fill_with_identity();
            if l > 0 {
                j.view_mut((row, self.lay.x(l)), (nx, nx)).copy_from(&(-a));
            }
            j.view_mut((row, self.lay.u(l)), (nx, nu)).copy_from(&(-b));
        }
        let xb = z.rows(self.lay.xbar(), nx).into_owned();
        let ub = z.rows(self.lay.ubar(), nu).into_owned();
        let (a, b) = linearize(&self.p.model, &xb, &ub);
        j.view_mut((nn * nx, self.lay.xbar()), (nx, nx))
            .copy_from(&(DMatrix::identity(nx, nx) - a));
        j.view_mut((nn * nx, self.lay.ubar()), (nx, nu)).copy_from(&(-b));
        j
    }

    fn ineq(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.lin.len() + 1);
        for (k, (row, b)) in self.lin.iter().enumerate() {
            out[k] = row.iter().map(|(i, a)| a * z[*i]).sum::<f64>() - b;
        }
        let e = self.terminal_error(z);
        out[self.lin.len()] = e.dot(&(&self.p.terminal.p * &e)) - self.p.terminal.zeta;
        out
    }

    fn ineq_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.lin.len() + 1, self.lay.len());
        for (k, (row, _)) in self.lin.iter().enumerate() {
            for (i, a) in row {
                j[(k, *i)] = *a;
            }
        }
        let grad = &self.p.terminal.p * self.terminal_error(z) * 2.0;
        let last = self.lin.len();
        let nx = self.lay.nx;
        j.view_mut((last, self.lay.x(self.p.horizon)), (1, nx)).copy_from(&grad.transpose());
        j.view_mut((last, self.lay.xbar()), (1, nx)).copy_from(&(-grad.transpose()));
        j
    }
}

impl OcpProblem {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if self.x0.len() != self.model.state_dim() {
            return Err(Error::invalid("initial state has the wrong dimension"));
        }
        for nb in &self.bearings {
            if (nb.bearing.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("bearing towards {} is not a unit vector", nb.neighbor)));
            }
        }
        self.weights.validate(self.model.state_dim(), self.model.input_dim())
    }

    /// Exact objective value of a candidate.
    pub fn cost_of(&self, sol: &OcpSolution) -> f64 {
        let nlp = OcpNlp::new(self);
        nlp.objective(&nlp.pack(sol))
    }

    pub fn offset_optimum(&self) -> Point {
        offset_optimum(&self.r_ref, &self.bearings, &self.weights, &self.setpoints)
    }

    /// First violated constraint of a candidate solution, if any.
    pub fn check_feasible(&self, sol: &OcpSolution) -> std::result::Result<(), String> {
        let nn = self.horizon;
        if sol.u_seq.len() != nn || sol.x_seq.len() != nn + 1 {
            return Err("candidate has the wrong horizon".into());
        }
        if (&sol.x_seq[0] - &self.x0).amax() > DYN_TOL {
            return Err("first state differs from the measured state".into());
        }
        for l in 0..nn {
            let x = if l == 0 { &self.x0 } else { &sol.x_seq[l] };
            let res = (&sol.x_seq[l + 1] - self.model.step(x, &sol.u_seq[l])).amax();
            if !(res <= DYN_TOL) {
                return Err(format!("dynamics residual {res:e} at stage {l}"));
            }
            if !self.bounds.contains_input(&sol.u_seq[l], FEAS_TOL) {
                return Err(format!("input bound violated at stage {l}"));
            }
            if !self.bounds.contains_state(&sol.x_seq[l + 1], FEAS_TOL) {
                return Err(format!("state bound violated at stage {}", l + 1));
            }
        }
        let steady = (&sol.xbar - self.model.step(&sol.xbar, &sol.ubar)).amax();
        if !(steady <= DYN_TOL) {
            return Err(format!("artificial steady state residual {steady:e}"));
        }
        if (self.model.position(&sol.xbar) - DVector::from_column_slice(sol.rbar.as_slice())).norm() > 1e-9 {
            return Err("artificial reference differs from C x_bar".into());
        }
        if !self.steady_bounds.contains_state(&sol.xbar, FEAS_TOL) || !self.steady_bounds.contains_input(&sol.ubar, FEAS_TOL) {
            return Err("artificial steady state outside its bounds".into());
        }
        if !self.setpoints.contains(&sol.rbar, FEAS_TOL) {
            return Err("artificial reference outside the admissible set".into());
        }
        let level = self.terminal.level_around(&sol.x_seq[nn], &sol.xbar);
        if !(level <= self.terminal.zeta + FEAS_TOL) {
            return Err(format!("terminal level {level:e} exceeds {:e}", self.terminal.zeta));
        }
        Ok(())
    }

    /// Rest at the admissible point nearest the current position, steered
    /// there by the terminal law (inputs clipped to their bounds).
    pub fn cold_start(&self) -> Result<OcpSolution> {
        let p0 = self.model.position(&self.x0);
        let r0 = self.setpoints.clamp(&Point::new(p0[0], p0[1]));
        let steady = steady_state_from_position(&self.model, &DVector::from_column_slice(r0.as_slice()))?;
        let mut x_seq = vec![self.x0.clone()];
        let mut u_seq = Vec::with_capacity(self.horizon);
        for l in 0..self.horizon {
            let mut u = self.terminal.control_around(&x_seq[l], &steady.x, &steady.u);
            for k in 0..u.len() {
                u[k] = u[k].clamp(self.bounds.u_lo[k], self.bounds.u_hi[k]);
            }
            x_seq.push(self.model.step(&x_seq[l], &u));
            u_seq.push(u);
        }
        let mut sol = OcpSolution {
            u_seq,
            x_seq,
            xbar: steady.x,
            ubar: steady.u,
            rbar: r0,
            cost: 0.0,
            status: SolveStatus::MaxIter,
            iterations: 0,
            kkt_residual: f64::NAN,
        };
        sol.cost = self.cost_of(&sol);
        Ok(sol)
    }
}

/// Drops the first input and appends the terminal law at the last state;
/// states are re-simulated from the problem's measured state.
pub fn shift_warm_start(prev: &OcpSolution, problem: &OcpProblem) -> OcpSolution {
    let nn = prev.u_seq.len();
    let last = &prev.x_seq[nn];
    let mut u_seq: Vec<DVector<f64>> = prev.u_seq[1..].to_vec();
    u_seq.push(problem.terminal.control_around(last, &prev.xbar, &prev.ubar));
    let mut x_seq = vec![problem.x0.clone()];
    for u in &u_seq {
        let next = problem.model.step(x_seq.last().expect("nonempty"), u);
        x_seq.push(next);
    }
    let mut sol = OcpSolution {
        u_seq,
        x_seq,
        xbar: prev.xbar.clone(),
        ubar: prev.ubar.clone(),
        rbar: prev.rbar,
        cost: 0.0,
        status: SolveStatus::MaxIter,
        iterations: 0,
        kkt_residual: f64::NAN,
    };
    sol.cost = problem.cost_of(&sol);
    sol
}

/// Solves the OCP from `warm` (or a cold start). The result is verified
/// against every constraint; if the solver's point fails verification but
/// the warm start passes, the warm start is returned as a feasible fallback.
pub fn solve_ocp(problem: &OcpProblem, warm: Option<&OcpSolution>) -> Result<OcpSolution> {
    problem.validate()?;
    let start = match warm {
        Some(w) => w.clone(),
        None => problem.cold_start()?,
    };
    let nlp = OcpNlp::new(problem);
    let result = ipm::solve(&nlp, nlp.pack(&start), &problem.solver);
    let (u_seq, x_seq, xbar, ubar) = nlp.unpack(&result.z);
    let rbar_v = problem.model.position(&xbar);
    let sol = OcpSolution {
        u_seq,
        x_seq,
        rbar: Point::new(rbar_v[0], rbar_v[1]),
        xbar,
        ubar,
        cost: nlp.objective(&result.z),
        status: if result.status == IpmStatus::Converged {
            SolveStatus::Solved
        } else {
            SolveStatus::MaxIter
        },
        iterations: result.iterations,
        kkt_residual: result.stationarity,
    };
    match problem.check_feasible(&sol) {
        Ok(()) => {
            if sol.status != SolveStatus::Solved {
                log::warn!(
                    "OCP solver stopped after {} iterations with stationarity {:e}",
                    result.iterations,
                    result.stationarity
                );
            }
            Ok(sol)
        }
        Err(why) => match warm.map(|w| problem.check_feasible(w)) {
            Some(Ok(())) => {
                log::warn!("OCP solution rejected ({why}); keeping the feasible warm start");
                let mut fallback = warm.expect("checked").clone();
                fallback.status = SolveStatus::MaxIter;
                fallback.cost = problem.cost_of(&fallback);
                Ok(fallback)
            }
            _ => Err(Error::Infeasible(format!(
                "{why} (solver status {:?}, {} iterations)",
                result.status, result.iterations
            ))),
        },
    }
}

/// Applies the receding-horizon law: the first optimal input.
pub fn mpc_step(problem: &OcpProblem, warm: Option<&OcpSolution>) -> Result<(DVector<f64>, OcpSolution)> {
    let sol = solve_ocp(problem, warm)?;
    Ok((sol.u_seq[0].clone(), sol))
}

/// Stage cost `l(x - x_bar, u - u_bar)`.
pub fn stage_cost(weights: &CostWeights, x: &DVector<f64>, xbar: &DVector<f64>, u: &DVector<f64>, ubar: &DVector<f64>) -> f64 {
    let e = x - xbar;
    let v = u - ubar;
    e.dot(&(&weights.q * &e)) + v.dot(&(&weights.r * &v))
}
