//! LQR terminal law, scaled Lyapunov matrix and the invariant ellipsoid
//! `{x : (x - x_bar)^T P (x - x_bar) <= zeta}` around a steady state.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{BoxConstraints, Dynamics, SteadyState};
use crate::error::{Error, Result};

const RICCATI_TOL: f64 = 1e-10;
const RICCATI_MAX_ITERS: usize = 10_000;
/// Slack allowed in the sampled one-step decrease inequality.
pub const DECREASE_TOL: f64 = 1e-9;
/// Position mismatch tolerated between a reference and the set's steady state.
pub const REFERENCE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Lqr {
    /// Feedback `u = K x`.
    pub k: DMatrix<f64>,
    /// Stabilizing solution of the discrete algebraic Riccati equation.
    pub p: DMatrix<f64>,
    pub iterations: usize,
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn riccati_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = r + b.transpose() * p * b;
    let rhs = b.transpose() * p * a;
    s.lu()
        .solve(&rhs)
        .map(|x| -x)
        .ok_or_else(|| Error::NotStabilizable("R + B^T P B is singular".into()))
}

/// Riccati recursion from `P = Q` until successive iterates agree.
pub fn lqr_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Lqr> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::invalid("lqr_gain: inconsistent matrix dimensions"));
    }
    let mut p = q.clone();
    for it in 1..=RICCATI_MAX_ITERS {
        let k = riccati_gain(a, b, r, &p)?;
        // P' = Q + A^T P (A + B K)
        let mut next = q + a.transpose() * &p * (a + b * &k);
        next = (&next + next.transpose()) / 2.0;
        let change = (&next - &p).amax();
        p = next;
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
        if change <= RICCATI_TOL * p.amax().max(1.0) {
            let k = riccati_gain(a, b, r, &p)?;
            let rho = spectral_radius(&(a + b * &k));
            if rho >= 1.0 {
                return Err(Error::NotStabilizable(format!("closed-loop spectral radius {rho} >= 1")));
            }
            return Ok(Lqr { k, p, iterations: it });
        }
    }
    Err(Error::NotStabilizable(format!(
        "Riccati recursion did not converge in {RICCATI_MAX_ITERS} iterations"
    )))
}

/// Largest admissible scaling constant: `1 - rho(A_K)^2`.
pub fn scaling_bound(a_k: &DMatrix<f64>) -> f64 {
    1.0 - spectral_radius(a_k).powi(2)
}

/// Solves `(A_K / sqrt(1 - c))^T P (A_K / sqrt(1 - c)) - P = -Q*` through
/// the Kronecker-vectorized linear system.
pub fn lyapunov_p(a_k: &DMatrix<f64>, q_star: &DMatrix<f64>, c: f64) -> Result<DMatrix<f64>> {
    let n = a_k.nrows();
    if a_k.ncols() != n || q_star.shape() != (n, n) {
        return Err(Error::invalid("lyapunov_p: inconsistent matrix dimensions"));
    }
    let bound = scaling_bound(a_k);
    if !(c >= 0.0 && c < bound) {
        return Err(Error::InvalidScaling { c, bound });
    }
    let at = a_k.transpose();
    let lhs = at.kronecker(&at) / (1.0 - c) - DMatrix::identity(n * n, n * n);
    let rhs = -DVector::from_column_slice(q_star.as_slice());
    let vec_p = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::invalid("Lyapunov system is singular"))?;
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    let p = (&p + p.transpose()) / 2.0;
    if p.clone().cholesky().is_none() {
        return Err(Error::invalid("Lyapunov solution is not positive definite; is Q* positive definite?"));
    }
    Ok(p)
}

/// Max-abs residual of the scaled Lyapunov equation.
pub fn lyapunov_residual(a_k: &DMatrix<f64>, p: &DMatrix<f64>, q_star: &DMatrix<f64>, c: f64) -> f64 {
    (a_k.transpose() * p * a_k / (1.0 - c) - p + q_star).amax()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizingOptions {
    /// Random unit directions (in the metric of `P`) used to probe the set.
    pub directions: usize,
    pub bisection_iters: usize,
    /// Applied to the bisected level when the decrease condition binds.
    pub safety: f64,
    pub seed: u64,
}

impl Default for SizingOptions {
    fn default() -> Self {
        SizingOptions {
            directions: 512,
            bisection_iters: 40,
            safety: 0.9,
            seed: 0,
        }
    }
}

/// Everything the OCP needs about the terminal ingredients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TerminalSet {
    pub k: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub zeta: f64,
    pub c: f64,
    pub steady: SteadyState,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q_star: DMatrix<f64>,
}

impl TerminalSet {
    /// `(x - x_bar)^T P (x - x_bar)` for an arbitrary steady state.
    pub fn level_around(&self, x: &DVector<f64>, x_bar: &DVector<f64>) -> f64 {
        let e = x - x_bar;
        e.dot(&(&self.p * &e))
    }

    pub fn level(&self, x: &DVector<f64>) -> f64 {
        self.level_around(x, &self.steady.x)
    }

    /// Terminal law `u_bar + K (x - x_bar)` for an arbitrary steady state.
    pub fn control_around(&self, x: &DVector<f64>, x_bar: &DVector<f64>, u_bar: &DVector<f64>) -> DVector<f64> {
        u_bar + &self.k * (x - x_bar)
    }

    /// The same set around another rest position, valid for
    /// position-invariant models.
    pub fn translated(&self, model: &dyn Dynamics, r_bar: &DVector<f64>) -> TerminalSet {
        let shift = model.output_matrix().transpose() * (r_bar - &self.steady.r);
        let mut out = self.clone();
        out.steady.x += shift;
        out.steady.r = r_bar.clone();
        out
    }
}

/// Membership in the set around its own steady state, which must sit at `r_bar`.
pub fn in_terminal_set(x: &DVector<f64>, r_bar: &DVector<f64>, ts: &TerminalSet) -> bool {
    (r_bar - &ts.steady.r).norm() < REFERENCE_TOL && ts.level(x) <= ts.zeta
}

/// `l_N(f(x, kappa(x)) - x_bar) - l_N(x - x_bar) + l(x - x_bar, kappa(x) - u_bar)`
/// around the set's own steady state; the decrease inequality asks for this
/// to be at most `DECREASE_TOL`.
pub fn decrease_gap(model: &dyn Dynamics, ts: &TerminalSet, x: &DVector<f64>) -> f64 {
    gap(model, &ts.k, &ts.p, &ts.q, &ts.r, &ts.steady, x)
}

fn gap(
    model: &dyn Dynamics,
    k: &DMatrix<f64>,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    steady: &SteadyState,
    x: &DVector<f64>,
) -> f64 {
    let e = x - &steady.x;
    let v = k * &e;
    let u = &steady.u + &v;
    let next = model.step(x, &u) - &steady.x;
    next.dot(&(p * &next)) - e.dot(&(p * &e)) + e.dot(&(q * &e)) + v.dot(&(r * &v))
}

/// Largest level keeping every input of the terminal law and every state
/// inside the box, from the ellipsoid's support function.
fn box_level(bounds: &BoxConstraints, steady: &SteadyState, k: &DMatrix<f64>, p_inv: &DMatrix<f64>) -> Result<f64> {
    let mut zeta = f64::INFINITY;
    let mut limit = |slack: f64, spread: f64, what: String| -> Result<()> {
        if !slack.is_finite() {
            return Ok(());
        }
        if slack <= 0.0 {
            return Err(Error::TerminalSetEmpty(format!("steady state violates the {what} bound")));
        }
        if spread > 0.0 {
            zeta = zeta.min(slack * slack / spread);
        }
        Ok(())
    };
    for m in 0..steady.x.len() {
        let slack = (bounds.x_hi[m] - steady.x[m]).min(steady.x[m] - bounds.x_lo[m]);
        limit(slack, p_inv[(m, m)], format!("state {m}"))?;
    }
    for m in 0..steady.u.len() {
        let row = k.row(m);
        let spread = (row * p_inv * row.transpose())[(0, 0)];
        let slack = (bounds.u_hi[m] - steady.u[m]).min(steady.u[m] - bounds.u_lo[m]);
        limit(slack, spread, format!("input {m}"))?;
    }
    Ok(zeta)
}

/// Probe points `x_bar + s L^{-T} w` with `P = L L^T`, `|w| = 1`.
fn probe_offsets(p: &DMatrix<f64>, opts: &SizingOptions) -> Result<Vec<DVector<f64>>> {
    let n = p.nrows();
    let chol = p
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("terminal matrix P is not positive definite"))?;
    let l_t = chol.l().transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(opts.directions + 2 * n);
    for axis in 0..n {
        for sign in [1.0, -1.0] {
            dirs.push(DVector::from_fn(n, |i, _| if i == axis { sign } else { 0.0 }));
        }
    }
    for _ in 0..opts.directions {
        let w = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let norm: f64 = w.norm();
        if norm > 1e-12 {
            dirs.push(w / norm);
        }
    }
    let mut out = Vec::with_capacity(dirs.len() * 5);
    for w in dirs {
        let e = l_t
            .solve_upper_triangular(&w)
            .ok_or_else(|| Error::invalid("singular Cholesky factor"))?;
        for frac in [0.1, 0.25, 0.5, 0.75, 1.0] {
            out.push(&e * frac);
        }
    }
    Ok(out)
}

/// Largest level `zeta` at which the sampled set satisfies the constraints
/// under the terminal law and the one-step Lyapunov decrease.
#[allow(clippy::too_many_arguments)]
pub fn size_terminal_set(
    model: &dyn Dynamics,
    bounds: &BoxConstraints,
    steady: &SteadyState,
    k: &DMatrix<f64>,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &SizingOptions,
) -> Result<f64> {
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::invalid("terminal matrix P is singular"))?;
    let offsets = probe_offsets(p, opts)?;
    let passes = |zeta: f64| {
        let s = zeta.sqrt();
        offsets.iter().all(|e| {
            let x = &steady.x + e * s;
            let u = &steady.u + k * (e * s);
            bounds.contains_state(&x, 1e-12)
                && bounds.contains_input(&u, 1e-12)
                && gap(model, k, p, q, r, steady, &x) <= DECREASE_TOL
        })
    };

    let mut hi = box_level(bounds, steady, k, &p_inv)?;
    if !hi.is_finite() {
        hi = 1.0;
        for _ in 0..60 {
            if !passes(2.0 * hi) {
                break;
            }
            hi *= 2.0;
        }
    }
    if passes(hi) {
        return Ok(hi);
    }
    let mut lo = 0.0;
    for _ in 0..opts.bisection_iters {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(Error::TerminalSetEmpty(
            "no positive level satisfies the sampled decrease condition".into(),
        ));
    }
    Ok(lo * opts.safety)
}

/// Linearizes at the steady state, computes the LQR law, the Lyapunov
/// matrix with `c = c_fraction (1 - rho(A_K)^2)` and sizes the set.
#[allow(clippy::too_many_arguments)]
pub fn build_terminal_set(
    model: &dyn Dynamics,
    bounds: &BoxConstraints,
    steady: &SteadyState,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    c_fraction: f64,
    opts: &SizingOptions,
) -> Result<TerminalSet> {
    if !(c_fraction > 0.0 && c_fraction < 1.0) {
        return Err(Error::invalid(format!("c_fraction must lie in (0, 1), got {c_fraction}")));
    }
    let (a, b) = crate::dynamics::linearize(model, &steady.x, &steady.u);
    let lqr = lqr_gain(&a, &b, q, r)?;
    let a_k = &a + &b * &lqr.k;
    let c = c_fraction * scaling_bound(&a_k);
    let q_star = q + lqr.k.transpose() * r * &lqr.k;
    let p = lyapunov_p(&a_k, &q_star, c)?;
    let zeta = size_terminal_set(model, bounds, steady, &lqr.k, &p, q, r, opts)?;
    Ok(TerminalSet {
        k: lqr.k,
        p,
        zeta,
        c,
        steady: steady.clone(),
        q: q.clone(),
        r: r.clone(),
        q_star,
    })
}
