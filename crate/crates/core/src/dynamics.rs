//! Discrete-time robot models, linearization and steady states.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Central-difference step used when a model has no analytic Jacobians.
pub const FD_STEP: f64 = 1e-6;
/// Steady states must satisfy `||f(x, u) - x|| <` this.
pub const STEADY_TOL: f64 = 1e-9;
const NEWTON_ITERS: usize = 50;

/// A discrete-time model `x' = f(x, u)` whose position is `C x`.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn position_dim(&self) -> usize;
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// `(df/dx, df/du)` when known in closed form.
    fn jacobians(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }

    /// Selects the position; defaults to the leading `position_dim` states.
    fn output_matrix(&self) -> DMatrix<f64> {
        let (d, nx) = (self.position_dim(), self.state_dim());
        DMatrix::from_fn(d, nx, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    fn position(&self, x: &DVector<f64>) -> DVector<f64> {
        self.output_matrix() * x
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `p' = p + h v`, `v' = v + h u`.
    #[default]
    DoubleIntegrator,
    /// `p' = p + h v`, `v' = v + h (u - kappa ||v|| v)`.
    Drag,
}

/// Planar robot with state `(p, v)` and acceleration input, subject to
/// `|v|_inf <= v_max` and `|u|_inf <= u_max`. Positions are unconstrained
/// here; the coverage layer keeps them in the region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotModel {
    pub kind: ModelKind,
    pub h: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub kappa: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        RobotModel {
            kind: ModelKind::DoubleIntegrator,
            h: 0.1,
            u_max: 1.0,
            v_max: 0.5,
            kappa: 0.5,
        }
    }
}

/// Axis-aligned bounds on states and inputs; infinite entries are free.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxConstraints {
    pub x_lo: DVector<f64>,
    pub x_hi: DVector<f64>,
    pub u_lo: DVector<f64>,
    pub u_hi: DVector<f64>,
}

impl BoxConstraints {
    pub fn contains_state(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.iter().zip(self.x_lo.iter().zip(self.x_hi.iter())).all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    pub fn contains_input(&self, u: &DVector<f64>, tol: f64) -> bool {
        u.iter().zip(self.u_lo.iter().zip(self.u_hi.iter())).all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    /// Shrinks every finite bound inwards by `eps`.
    pub fn shrink(&self, eps: f64) -> BoxConstraints {
        BoxConstraints {
            x_lo: self.x_lo.map(|v| v + eps),
            x_hi: self.x_hi.map(|v| v - eps),
            u_lo: self.u_lo.map(|v| v + eps),
            u_hi: self.u_hi.map(|v| v - eps),
        }
    }
}

impl RobotModel {
    pub fn double_integrator(h: f64, u_max: f64, v_max: f64) -> Self {
        RobotModel {
            kind: ModelKind::DoubleIntegrator,
            h,
            u_max,
            v_max,
            ..Default::default()
        }
    }

    pub fn drag(h: f64, u_max: f64, v_max: f64, kappa: f64) -> Self {
        RobotModel {
            kind: ModelKind::Drag,
            h,
            u_max,
            v_max,
            kappa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("model {name} must be positive and finite, got {v}")))
            }
        };
        positive("h", self.h)?;
        positive("u_max", self.u_max)?;
        positive("v_max", self.v_max)?;
        if self.kind == ModelKind::Drag && !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::invalid(format!("drag coefficient must be non-negative, got {}", self.kappa)));
        }
        Ok(())
    }

    pub fn constraints(&self) -> BoxConstraints {
        let inf = f64::INFINITY;
        BoxConstraints {
            x_lo: DVector::from_vec(vec![-inf, -inf, -self.v_max, -self.v_max]),
            x_hi: DVector::from_vec(vec![inf, inf, self.v_max, self.v_max]),
            u_lo: DVector::from_element(2, -self.u_max),
            u_hi: DVector::from_element(2, self.u_max),
        }
    }
}

impl Dynamics for RobotModel {
    fn state_dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn position_dim(&self) -> usize {
        2
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let h = self.h;
        let (vx, vy) = (x[2], x[3]);
        let (ax, ay) = match self.kind {
            ModelKind::DoubleIntegrator => (u[0], u[1]),
            ModelKind::Drag => {
                let s = self.kappa * vx.hypot(vy);
                (u[0] - s * vx, u[1] - s * vy)
            }
        };
        DVector::from_vec(vec![x[0] + h * vx, x[1] + h * vy, vx + h * ax, vy + h * ay])
    }

    fn jacobians(&self, x: &DVector<f64>, _u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let h = self.h;
        let mut a = DMatrix::identity(4, 4);
        a[(0, 2)] = h;
        a[(1, 3)] = h;
        if self.kind == ModelKind::Drag {
            let v = nalgebra::Vector2::new(x[2], x[3]);
            let speed = v.norm();
            if speed > 0.0 {
                // d(||v|| v)/dv = ||v|| I + v v^T / ||v||
                let d = nalgebra::Matrix2::identity() * speed + v * v.transpose() / speed;
                for r in 0..2 {
                    for c in 0..2 {
                        a[(2 + r, 2 + c)] -= h * self.kappa * d[(r, c)];
                    }
                }
            }
        }
        let mut b = DMatrix::zeros(4, 2);
        b[(2, 0)] = h;
        b[(3, 1)] = h;
        Some((a, b))
    }
}

/// Central finite-difference Jacobians.
pub fn fd_jacobians(model: &dyn Dynamics, x: &DVector<f64>, u: &DVector<f64>, step: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (nx, nu) = (model.state_dim(), model.input_dim());
    let mut a = DMatrix::zeros(nx, nx);
    let mut b = DMatrix::zeros(nx, nu);
    for c in 0..nx {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[c] += step;
        xm[c] -= step;
        a.set_column(c, &((model.step(&xp, u) - model.step(&xm, u)) / (2.0 * step)));
    }
    for c in 0..nu {
        let (mut up, mut um) = (u.clone(), u.clone());
        up[c] += step;
        um[c] -= step;
        b.set_column(c, &((model.step(x, &up) - model.step(x, &um)) / (2.0 * step)));
    }
    (a, b)
}

/// `(A, B)` at `(x, u)`: analytic when the model provides it, otherwise by
/// central differences.
pub fn linearize(model: &dyn Dynamics, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    model.jacobians(x, u).unwrap_or_else(|| fd_jacobians(model, x, u, FD_STEP))
}

/// A rest point: `x = f(x, u)` with position `r = C x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub r: DVector<f64>,
}

/// Solves `f(x, u) = x`, `C x = r` by Gauss-Newton from `x = C^T r`, `u = 0`.
pub fn steady_state_from_position(model: &dyn Dynamics, r: &DVector<f64>) -> Result<SteadyState> {
    let (nx, nu) = (model.state_dim(), model.input_dim());
    let c = model.output_matrix();
    if r.len() != c.nrows() {
        return Err(Error::invalid(format!("position has {} entries, expected {}", r.len(), c.nrows())));
    }
    let mut x = c.transpose() * r;
    let mut u = DVector::zeros(nu);
    let residual = |x: &DVector<f64>, u: &DVector<f64>| {
        let fx = model.step(x, u) - x;
        let cx = &c * x - r;
        DVector::from_iterator(nx + cx.len(), fx.iter().chain(cx.iter()).copied())
    };
    for _ in 0..NEWTON_ITERS {
        let res = residual(&x, &u);
        if res.norm() < STEADY_TOL * 0.1 {
            let r = &c * &x;
            return Ok(SteadyState { x, u, r });
        }
        let (a, b) = linearize(model, &x, &u);
        let mut jac = DMatrix::zeros(nx + c.nrows(), nx + nu);
        jac.view_mut((0, 0), (nx, nx)).copy_from(&(a - DMatrix::identity(nx, nx)));
        jac.view_mut((0, nx), (nx, nu)).copy_from(&b);
        jac.view_mut((nx, 0), (c.nrows(), nx)).copy_from(&c);
        let delta = jac
            .svd(true, true)
            .solve(&(-res), 1e-12)
            .map_err(|e| Error::invalid(format!("steady-state Newton step failed: {e}")))?;
        x += delta.rows(0, nx);
        u += delta.rows(nx, nu);
    }
    Err(Error::NoSteadyState {
        position: r.iter().copied().collect(),
        iterations: NEWTON_ITERS,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub holds: bool,
    pub worst_violation: f64,
}

/// Samples `(x, u, p)` and checks `f(x + psi(p), u) = f(x, u) + psi(p)`
/// to `1e-9`, where `psi(p) = C^T p`.
pub fn position_invariance_check(model: &dyn Dynamics, n_samples: usize, seed: u64) -> InvarianceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ct = model.output_matrix().transpose();
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let x = DVector::from_fn(model.state_dim(), |_, _| rng.random_range(-1.0..1.0));
        let u = DVector::from_fn(model.input_dim(), |_, _| rng.random_range(-1.0..1.0));
        let p = DVector::from_fn(model.position_dim(), |_, _| rng.random_range(-10.0..10.0));
        let shift = &ct * p;
        let lhs = model.step(&(&x + &shift), &u);
        let rhs = model.step(&x, &u) + shift;
        worst = worst.max((lhs - rhs).amax());
    }
    InvarianceReport {
        holds: worst <= 1e-9,
        worst_violation: worst,
    }
}

/// Largest sampled `||f(x1, u) - f(x2, u)|| / ||x1 - x2||` over states and
/// inputs drawn from the model's box constraints (positions from `[-1, 1]`).
pub fn lipschitz_estimate(model: &RobotModel, n_samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample_x = |rng: &mut ChaCha8Rng| {
        DVector::from_vec(vec![
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-model.v_max..=model.v_max),
            rng.random_range(-model.v_max..=model.v_max),
        ])
    };
    let mut best: f64 = 0.0;
    for _ in 0..n_samples {
        let x1 = sample_x(&mut rng);
        let x2 = sample_x(&mut rng);
        let u = DVector::from_fn(2, |_, _| rng.random_range(-model.u_max..=model.u_max));
        let gap = (&x1 - &x2).norm();
        if gap > 1e-12 {
            best = best.max((model.step(&x1, &u) - model.step(&x2, &u)).norm() / gap);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn double_integrator_step() {
        let m = RobotModel::double_integrator(0.1, 1.0, 1.0);
        let next = m.step(&v(&[0.0, 0.0, 1.0, 0.0]), &v(&[0.0, 0.0]));
        assert_eq!(next.as_slice(), &[0.1, 0.0, 1.0, 0.0]);
        assert_eq!(m.position(&v(&[3.0, 4.0, 5.0, 6.0])).as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn drag_at_rest_matches_double_integrator() {
        let di = RobotModel::double_integrator(0.1, 1.0, 1.0);
        let drag = RobotModel::drag(0.1, 1.0, 1.0, 0.5);
        let x = v(&[0.3, -0.2, 0.0, 0.0]);
        let u = v(&[0.4, 0.7]);
        assert_eq!(di.step(&x, &u), drag.step(&x, &u));
        assert_eq!(linearize(&di, &x, &u), linearize(&drag, &x, &u));
    }

    #[test]
    fn double_integrator_linearization_is_exact() {
        let m = RobotModel::double_integrator(0.1, 1.0, 1.0);
        let (a, b) = linearize(&m, &v(&[0.0; 4]), &v(&[0.0; 2]));
        let a_ref = DMatrix::from_row_slice(4, 4, &[1.0, 0.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let b_ref = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.1]);
        assert_eq!((a, b), (a_ref, b_ref));
    }

    #[test]
    fn steady_states() {
        let m = RobotModel::double_integrator(0.1, 1.0, 1.0);
        let s = steady_state_from_position(&m, &v(&[3.0, -1.0])).unwrap();
        assert_eq!(s.x.as_slice(), &[3.0, -1.0, 0.0, 0.0]);
        assert_eq!(s.u.as_slice(), &[0.0, 0.0]);
        let d = RobotModel::drag(0.1, 1.0, 1.0, 0.5);
        let s = steady_state_from_position(&d, &v(&[0.2, 0.9])).unwrap();
        assert!((d.step(&s.x, &s.u) - &s.x).norm() < STEADY_TOL);
        assert_eq!(s.r.as_slice(), &[0.2, 0.9]);
    }

    /// A model whose velocity is pulled towards the origin by position feedback.
    struct Spring;

    impl Dynamics for Spring {
        fn state_dim(&self) -> usize {
            2
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn position_dim(&self) -> usize {
            1
        }
        fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
            v(&[x[0] + 0.1 * x[1], x[1] + 0.1 * (u[0] - x[0])])
        }
    }

    #[test]
    fn invariance_checks() {
        assert!(position_invariance_check(&RobotModel::double_integrator(0.1, 1.0, 1.0), 1000, 1).holds);
        assert!(position_invariance_check(&RobotModel::drag(0.1, 1.0, 1.0, 0.5), 1000, 2).holds);
        let broken = position_invariance_check(&Spring, 100, 3);
        assert!(!broken.holds && broken.worst_violation > 1e-3);
    }

    #[test]
    fn fd_fallback_for_models_without_jacobians() {
        let (a, b) = linearize(&Spring, &v(&[0.5, 0.1]), &v(&[0.2]));
        assert!((a - DMatrix::from_row_slice(2, 2, &[1.0, 0.1, -0.1, 1.0])).amax() < 1e-8);
        assert!((b - DMatrix::from_row_slice(2, 1, &[0.0, 0.1])).amax() < 1e-8);
    }

    #[test]
    fn lipschitz_bound_is_finite() {
        let l = lipschitz_estimate(&RobotModel::drag(0.1, 1.0, 0.5, 0.5), 2000, 4);
        assert!(l.is_finite() && l >= 1.0 && l < 2.0);
    }

    proptest! {
        #[test]
        fn drag_jacobian_matches_fd(vx in -1.0f64..1.0, vy in -1.0f64..1.0, ux in -1.0f64..1.0, uy in -1.0f64..1.0) {
            prop_assume!(vx.hypot(vy) > 1e-3);
            let m = RobotModel::drag(0.1, 1.0, 1.0, 0.5);
            let x = v(&[0.1, 0.2, vx, vy]);
            let u = v(&[ux, uy]);
            let (a, b) = m.jacobians(&x, &u).unwrap();
            let (fa, fb) = fd_jacobians(&m, &x, &u, FD_STEP);
            prop_assert!((a - fa).amax() < 1e-6);
            prop_assert!((b - fb).amax() < 1e-6);
        }
    }
}
