//! Primal-dual interior-point method for small dense nonlinear programs
//!
//! ```text
//! minimize f(z)  subject to  c_E(z) = 0,  c_I(z) <= 0
//! ```
//!
//! Inequalities get slacks `c_I(z) + s = 0, s > 0`. Each iteration solves
//! the condensed Newton system with a dense LU factorization and takes a
//! fraction-to-boundary step chosen by backtracking on an l1 merit function.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub trait Nlp {
    fn num_vars(&self) -> usize;
    fn objective(&self, z: &DVector<f64>) -> f64;
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64>;
    /// Hessian of the Lagrangian, or a positive semidefinite approximation.
    fn hessian(&self, z: &DVector<f64>, y: &DVector<f64>, lambda: &DVector<f64>) -> DMatrix<f64>;
    fn eq(&self, z: &DVector<f64>) -> DVector<f64>;
    fn eq_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64>;
    fn ineq(&self, z: &DVector<f64>) -> DVector<f64>;
    fn ineq_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IpmOptions {
    pub max_iter: usize,
    /// Stationarity tolerance (max-abs gradient of the Lagrangian).
    pub tol: f64,
    /// Constraint and complementarity tolerance.
    pub feas_tol: f64,
    /// Initial barrier parameter.
    pub tau_init: f64,
    pub tau_min: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            max_iter: 200,
            tol: 1e-7,
            feas_tol: 1e-9,
            tau_init: 1e-3,
            tau_min: 1e-11,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IpmStatus {
    Converged,
    MaxIter,
    /// The line search or the linear algebra broke down.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct IpmResult {
    pub z: DVector<f64>,
    pub y: DVector<f64>,
    pub lambda: DVector<f64>,
    pub status: IpmStatus,
    pub iterations: usize,
    /// Max-abs stationarity residual at the returned point.
    pub stationarity: f64,
    /// Max constraint violation at the returned point.
    pub infeasibility: f64,
}

const KAPPA_EPS: f64 = 10.0;
const KAPPA_SIGMA: f64 = 1e10;
const ARMIJO: f64 = 1e-4;

struct Residuals {
    grad: DVector<f64>,
    ce: DVector<f64>,
    ci: DVector<f64>,
    je: DMatrix<f64>,
    ji: DMatrix<f64>,
    dual: DVector<f64>,
}

fn residuals(nlp: &dyn Nlp, z: &DVector<f64>, y: &DVector<f64>, lambda: &DVector<f64>) -> Residuals {
    let grad = nlp.gradient(z);
    let ce = nlp.eq(z);
    let ci = nlp.ineq(z);
    let je = nlp.eq_jacobian(z);
    let ji = nlp.ineq_jacobian(z);
    let dual = &grad + je.transpose() * y + ji.transpose() * lambda;
    Residuals { grad, ce, ci, je, ji, dual }
}

fn amax(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn merit(nlp: &dyn Nlp, z: &DVector<f64>, s: &DVector<f64>, tau: f64, nu: f64) -> f64 {
    let barrier: f64 = s.iter().map(|v| v.ln()).sum();
    nlp.objective(z) - tau * barrier + nu * (l1(&nlp.eq(z)) + l1(&(nlp.ineq(z) + s)))
}

/// Largest step in `(0, 1]` keeping `v + a dv >= (1 - frac) v`.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>, frac: f64) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -frac * x / d)
        .fold(1.0, f64::min)
}

pub fn solve(nlp: &dyn Nlp, z0: DVector<f64>, opts: &IpmOptions) -> IpmResult {
    let n = nlp.num_vars();
    let mut z = z0;
    let m_e = nlp.eq(&z).len();
    let ci0 = nlp.ineq(&z);
    let m_i = ci0.len();
    let mut tau = opts.tau_init;
    let mut s = ci0.map(|c| (-c).max(tau));
    let mut lambda = s.map(|si| tau / si);
    let mut y = DVector::zeros(m_e);
    let mut nu: f64 = 1.0;
    let mut status = IpmStatus::MaxIter;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter;
        let res = residuals(nlp, &z, &y, &lambda);
        let r_i = &res.ci + &s;
        let comp = s.component_mul(&lambda);
        let stat = amax(&res.dual);
        let feas = amax(&res.ce).max(amax(&r_i));
        let comp_max = amax(&comp);
        if stat <= opts.tol && feas <= opts.feas_tol && comp_max <= opts.feas_tol {
            status = IpmStatus::Converged;
            break;
        }
        // barrier subproblem solved well enough: tighten
        loop {
            let comp_err = comp.iter().map(|c| (c - tau).abs()).fold(0.0, f64::max);
            let err = stat.max(feas).max(comp_err);
            if err <= KAPPA_EPS * tau && tau > opts.tau_min {
                tau = opts.tau_min.max((0.2 * tau).min(tau.powf(1.5)));
            } else {
                break;
            }
        }

        let sigma = lambda.component_div(&s);
        let r_c = comp.map(|c| c - tau);
        // Newton system in (dz, dy) after eliminating ds and dlambda
        let w = nlp.hessian(&z, &y, &lambda);
        let ji_t = res.ji.transpose();
        let h = w + &ji_t * DMatrix::from_diagonal(&sigma) * &res.ji;
        let rhs_z = -(&res.dual + &ji_t * (sigma.component_mul(&r_i) - r_c.component_div(&s)));
        let mut kkt = DMatrix::zeros(n + m_e, n + m_e);
        let mut rhs = DVector::zeros(n + m_e);
        rhs.rows_mut(0, n).copy_from(&rhs_z);
        rhs.rows_mut(n, m_e).copy_from(&(-&res.ce));
        let mut delta = 0.0;
        let sol = loop {
            kkt.fill(0.0);
            kkt.view_mut((0, 0), (n, n)).copy_from(&h);
            kkt.view_mut((0, n), (n, m_e)).copy_from(&res.je.transpose());
            kkt.view_mut((n, 0), (m_e, n)).copy_from(&res.je);
            for k in 0..n {
                kkt[(k, k)] += delta;
            }
            for k in 0..m_e {
                kkt[(n + k, n + k)] -= delta * 1e-2;
            }
            match kkt.clone().lu().solve(&rhs) {
                Some(sol) if sol.iter().all(|v| v.is_finite()) => break Some(sol),
                _ if delta < 1e2 => delta = if delta == 0.0 { 1e-8 } else { delta * 100.0 },
                _ => break None,
            }
        };
        let Some(sol) = sol else {
            status = IpmStatus::Stalled;
            break;
        };
        let dz = sol.rows(0, n).into_owned();
        let dy = sol.rows(n, m_e).into_owned();
        let dlambda = sigma.component_mul(&(&res.ji * &dz + &r_i)) - r_c.component_div(&s);
        let ds = -(&r_i + &res.ji * &dz);

        let frac = (1.0 - tau).max(0.99);
        let a_pri = max_step(&s, &ds, frac);
        let a_dual = max_step(&lambda, &dlambda, frac);

        let y_new = &y + &dy;
        nu = nu.max(amax(&y_new).max(amax(&(&lambda + &dlambda))) * 1.1 + 1.0);
        let infeas = l1(&res.ce) + l1(&r_i);
        let slope = res.grad.dot(&dz) - tau * ds.component_div(&s).sum() - nu * infeas;
        let phi0 = merit(nlp, &z, &s, tau, nu);
        let mut alpha = a_pri;
        let mut accepted = false;
        for _ in 0..40 {
            let z_try = &z + &dz * alpha;
            let s_try = &s + &ds * alpha;
            if merit(nlp, &z_try, &s_try, tau, nu) <= phi0 + ARMIJO * alpha * slope.min(0.0) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // a tiny step still makes progress on the complementarity; give up
            // only once the step is negligible
            if alpha * amax(&dz) < 1e-14 {
                status = IpmStatus::Stalled;
                break;
            }
        }
        z += &dz * alpha;
        s += &ds * alpha;
        s.apply(|v| *v = v.max(1e-300));
        y += &dy * alpha;
        lambda += &dlambda * a_dual;
        for k in 0..m_i {
            let lo = tau / (KAPPA_SIGMA * s[k]);
            let hi = KAPPA_SIGMA * tau / s[k];
            lambda[k] = lambda[k].clamp(lo, hi);
        }
        iterations = iter + 1;
    }

    let res = residuals(nlp, &z, &y, &lambda);
    let infeasibility = amax(&res.ce).max(res.ci.iter().fold(0.0, |m, c| m.max(*c)));
    IpmResult {
        stationarity: amax(&res.dual),
        infeasibility,
        z,
        y,
        lambda,
        status,
        iterations,
    }
}
