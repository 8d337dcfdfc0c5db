use std::sync::{Arc, RwLock};

use super::banded::{BandedLu, BandedMatrix};
use super::{ModelConfig, TrackingObjective};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stepper::{StepAdjoint, Stepper};
use crate::vector;

/// Crank-Nicolson stepper for the coupled oscillator / transport model.
///
/// Spatial discretization of the field equation `v' = A v + b z`:
/// second-order linear upwind advection (first-order at `x_1`, where only the
/// boundary value is upstream), central diffusion, the Robin inflow
/// `v_0 - mu (v_1 - v_0) / dx = z` eliminated from the stencil, and the
/// outflow condition `v_xx(1) = 0` folded in by linear extrapolation
/// `v_{L+1} = 2 v_L - v_{L-1}`.
///
/// The oscillator part is solved by lagged functional iteration (the `z^2`
/// factor frozen at the previous iterate). The field couples to the
/// oscillator one way, through `z`, and is linear, so once `z` at the new time
/// level is known the field rows are solved directly with a banded LU.
#[derive(Debug)]
pub struct AdvectionVdp<T> {
    cfg: ModelConfig<T>,
    /// Spatial operator `A` (2 sub-, 1 super-diagonal).
    op: BandedMatrix<T>,
    /// Boundary coupling `b`; only the first two entries are non-zero.
    inflow: [T; 2],
    cache: RwLock<Vec<(T, Arc<CnOperators<T>>)>>,
}

#[derive(Debug)]
struct CnOperators<T> {
    /// `I - dt/2 A`, factored.
    implicit: BandedLu<T>,
    /// `I + dt/2 A`
    explicit: BandedMatrix<T>,
}

impl<T: Real> AdvectionVdp<T> {
    pub fn new(cfg: ModelConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_space;
        let c = cfg.a / cfg.dx;
        let d = cfg.mu / (cfg.dx * cfg.dx);
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        // Robin closure: v_0 = beta z + beta kappa v_1
        let kappa = cfg.mu / cfg.dx;
        let beta = T::one() / (T::one() + kappa);
        let v0_from_v1 = beta * kappa;

        let mut op = BandedMatrix::zeros(n, 2, 1);
        // row x_1: first-order upwind + central diffusion, v_0 eliminated
        op.set(0, 0, -c - two * d + (c + d) * v0_from_v1);
        op.set(0, 1, d);
        // row x_2: second-order upwind reaching v_0
        op.set(1, 0, two * c + d - half * c * v0_from_v1);
        op.set(1, 1, -(T::lit(1.5) * c + two * d));
        op.set(1, 2, d);
        for l in 2..n {
            op.set(l, l - 2, -half * c);
            op.set(l, l - 1, two * c + d);
            op.set(l, l, -(T::lit(1.5) * c + two * d));
            if l + 1 < n {
                op.set(l, l + 1, d);
            }
        }
        // outflow: extrapolated ghost cancels the diffusion stencil
        op.set(n - 1, n - 2, two * c);
        op.set(n - 1, n - 1, -T::lit(1.5) * c);

        let inflow = [(c + d) * beta, -half * c * beta];
        Ok(Self { cfg, op, inflow, cache: RwLock::new(Vec::new()) })
    }

    pub fn config(&self) -> &ModelConfig<T> {
        &self.cfg
    }

    pub fn objective(&self) -> TrackingObjective<T> {
        TrackingObjective::new(&self.cfg)
    }

    /// Spatial operator `A` and inflow vector `b` of `v' = A v + b z`.
    pub fn spatial_operator(&self) -> (&BandedMatrix<T>, Vec<T>) {
        let mut b = vec![T::zero(); self.cfg.n_space];
        b[0] = self.inflow[0];
        b[1] = self.inflow[1];
        (&self.op, b)
    }

    fn operators(&self, dt: T) -> Result<Arc<CnOperators<T>>> {
        if let Some((_, ops)) = self.cache.read().expect("cache poisoned").iter().find(|(k, _)| *k == dt) {
            return Ok(Arc::clone(ops));
        }
        let h = dt * T::lit(0.5);
        let implicit = self.op.scaled_plus_identity(-h, T::one()).factor()?;
        let explicit = self.op.scaled_plus_identity(h, T::one());
        let ops = Arc::new(CnOperators { implicit, explicit });
        let mut cache = self.cache.write().expect("cache poisoned");
        if !cache.iter().any(|(k, _)| *k == dt) {
            cache.push((dt, Arc::clone(&ops)));
        }
        Ok(ops)
    }

    /// Oscillator right-hand side `-z + rho (1 - z^2) w` (or `-z + rho w` in
    /// the frozen-linear mode).
    fn vdp_force(&self, z: T, w: T, rho: T) -> T {
        -z + rho * self.damping(z) * w
    }

    fn damping(&self, z: T) -> T {
        if self.cfg.vdp_nonlinear {
            T::one() - z * z
        } else {
            T::one()
        }
    }

    /// Partial derivatives `(f_z, f_w)` of the oscillator force.
    fn vdp_force_jac(&self, z: T, w: T, rho: T) -> (T, T) {
        let fz = if self.cfg.vdp_nonlinear { -T::one() - T::lit(2.0) * rho * z * w } else { -T::one() };
        (fz, rho * self.damping(z))
    }

    /// Crank-Nicolson residual of the oscillator equations at `(z1, w1)`.
    pub fn vdp_residual(&self, z0: T, w0: T, z1: T, w1: T, rho: T, dt: T) -> (T, T) {
        let h = dt * T::lit(0.5);
        let rz = z1 - z0 - h * (w0 + w1);
        let rw = w1 - w0 - h * (self.vdp_force(z0, w0, rho) + self.vdp_force(z1, w1, rho));
        (rz, rw)
    }

    /// Functional iteration for the implicit oscillator update.
    fn vdp_solve(&self, z0: T, w0: T, rho: T, dt: T) -> Result<(T, T)> {
        let h = dt * T::lit(0.5);
        let rhs_z = z0 + h * w0;
        let rhs_w = w0 + h * self.vdp_force(z0, w0, rho);
        let mut z = z0;
        let mut residual = T::infinity();
        for _ in 0..self.cfg.picard_max {
            // [1, -h; h, 1 - h rho (1 - z_k^2)] [z; w] = rhs
            let d = T::one() - h * rho * self.damping(z);
            let det = d + h * h;
            if det == T::zero() || !det.is_finite() {
                return Err(Error::NonConvergence { iterations: 0, residual: f64::INFINITY });
            }
            z = (d * rhs_z + h * rhs_w) / det;
            let w = (rhs_w - h * rhs_z) / det;
            let (rz, rw) = self.vdp_residual(z0, w0, z, w, rho, dt);
            residual = rz.abs().max(rw.abs());
            if !residual.is_finite() {
                break;
            }
            if residual <= self.cfg.picard_tol {
                return Ok((z, w));
            }
        }
        Err(Error::NonConvergence { iterations: self.cfg.picard_max, residual: residual.as_f64() })
    }
}

impl<T: Real> Stepper<T> for AdvectionVdp<T> {
    fn dim(&self) -> usize {
        self.cfg.state_dim()
    }

    fn design_dim(&self) -> usize {
        1
    }

    fn initial_state(&self) -> Vec<T> {
        vec![T::one(); self.dim()]
    }

    fn step(&self, u_prev: &[T], design: &[T], dt: T) -> Result<Vec<T>> {
        debug_assert_eq!(u_prev.len(), self.dim());
        let rho = design[0];
        let (z0, w0) = (u_prev[0], u_prev[1]);
        let (z1, w1) = self.vdp_solve(z0, w0, rho, dt)?;

        let ops = self.operators(dt)?;
        let h = dt * T::lit(0.5);
        let mut rhs = ops.explicit.matvec(&u_prev[2..]);
        let zsum = h * (z0 + z1);
        rhs[0] = rhs[0] + self.inflow[0] * zsum;
        rhs[1] = rhs[1] + self.inflow[1] * zsum;
        let v1 = ops.implicit.solve(&rhs);

        let mut out = Vec::with_capacity(self.dim());
        out.push(z1);
        out.push(w1);
        out.extend_from_slice(&v1);
        if !vector::all_finite(&out) {
            return Err(Error::NonFinite("model step"));
        }
        Ok(out)
    }

    fn step_adjoint(&self, u_prev: &[T], design: &[T], dt: T, bar_next: &[T]) -> Result<StepAdjoint<T>> {
        let rho = design[0];
        let h = dt * T::lit(0.5);
        let (z0, w0) = (u_prev[0], u_prev[1]);
        let (z1, w1) = self.vdp_solve(z0, w0, rho, dt)?;
        let ops = self.operators(dt)?;

        // field rows: (I - hA)^T lam_v = bar v1
        let lam_v = ops.implicit.solve_transpose(&bar_next[2..]);
        let coupling = h * (self.inflow[0] * lam_v[0] + self.inflow[1] * lam_v[1]);

        // oscillator rows: J^T lam = (bar z1 + coupling, bar w1),
        // J = [1, -h; -h fz1, 1 - h fw1]
        let (fz1, fw1) = self.vdp_force_jac(z1, w1, rho);
        let (a11, a12, a21, a22) = (T::one(), -h * fz1, -h, T::one() - h * fw1);
        let det = a11 * a22 - a12 * a21;
        if det == T::zero() || !det.is_finite() {
            return Err(Error::SingularLinearization("oscillator Jacobian".into()));
        }
        let (rz, rw) = (bar_next[0] + coupling, bar_next[1]);
        let lam_z = (a22 * rz - a12 * rw) / det;
        let lam_w = (a11 * rw - a21 * rz) / det;

        let (fz0, fw0) = self.vdp_force_jac(z0, w0, rho);
        let mut state = Vec::with_capacity(self.dim());
        state.push(lam_z + h * fz0 * lam_w + coupling);
        state.push(h * lam_z + (T::one() + h * fw0) * lam_w);
        state.extend(ops.explicit.matvec_transpose(&lam_v));

        let df_drho = self.damping(z0) * w0 + self.damping(z1) * w1;
        let design = vec![h * df_drho * lam_w];
        Ok(StepAdjoint { state, design })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(nonlinear: bool) -> AdvectionVdp<f64> {
        let mut cfg = ModelConfig::<f64>::reference().with_space(10).with_steps(100);
        cfg.vdp_nonlinear = nonlinear;
        AdvectionVdp::new(cfg).unwrap()
    }

    fn perturbed_state(model: &AdvectionVdp<f64>) -> Vec<f64> {
        (0..model.dim()).map(|i| 1.0 + 0.3 * ((i as f64) * 1.7).sin()).collect()
    }

    #[test]
    fn vdp_update_satisfies_crank_nicolson() {
        let model = AdvectionVdp::new(ModelConfig::<f64>::reference()).unwrap();
        let u0 = model.initial_state();
        let u1 = model.step(&u0, &[3.0], 5e-4).unwrap();
        let (rz, rw) = model.vdp_residual(u0[0], u0[1], u1[0], u1[1], 3.0, 5e-4);
        assert!(rz.abs() <= 1e-12 && rw.abs() <= 1e-12, "{rz} {rw}");
    }

    #[test]
    fn field_rows_satisfy_crank_nicolson() {
        let model = small(true);
        let u0 = perturbed_state(&model);
        let dt = 0.01;
        let u1 = model.step(&u0, &[2.0], dt).unwrap();
        let (a, b) = model.spatial_operator();
        let f0 = a.matvec(&u0[2..]);
        let f1 = a.matvec(&u1[2..]);
        for l in 0..model.config().n_space {
            let r = u1[2 + l] - u0[2 + l] - 0.5 * dt * (f0[l] + f1[l] + b[l] * (u0[0] + u1[0]));
            assert!(r.abs() < 1e-13, "row {l}: {r}");
        }
    }

    #[test]
    fn constant_field_is_preserved_away_from_inflow() {
        // v = 1 is a steady state of the interior stencil
        let model = small(false);
        let (a, _) = model.spatial_operator();
        let av = a.matvec(&[1.0; 10]);
        for &x in &av[2..] {
            assert!(x.abs() < 1e-10, "{x}");
        }
    }

    #[test]
    fn zero_adjoint_seed_gives_zero() {
        let model = small(true);
        let u0 = perturbed_state(&model);
        let adj = model.step_adjoint(&u0, &[3.0], 1e-3, &vec![0.0; model.dim()]).unwrap();
        assert!(adj.state.iter().all(|&x| x == 0.0));
        assert_eq!(adj.design, vec![0.0]);
    }

    #[test]
    fn picard_failure_is_reported() {
        let mut cfg = ModelConfig::<f64>::reference().with_space(10).with_steps(10);
        cfg.picard_max = 1;
        cfg.picard_tol = 1e-300;
        let model = AdvectionVdp::new(cfg).unwrap();
        let err = model.step(&model.initial_state(), &[3.0], 0.01).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 1, .. }));
    }

    #[test]
    fn single_precision_step_runs() {
        let cfg = ModelConfig::<f32>::reference().with_space(10).with_steps(10);
        let mut cfg = cfg;
        cfg.picard_tol = 1e-6;
        let model = AdvectionVdp::new(cfg).unwrap();
        let u1 = model.step(&model.initial_state(), &[3.0f32], 5e-4).unwrap();
        assert!(u1.iter().all(|x| x.is_finite()));
    }
}
