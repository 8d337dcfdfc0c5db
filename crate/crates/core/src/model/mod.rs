//! Van der Pol oscillator driving a one-dimensional advection-diffusion
//! field through a Robin inflow condition.
//!
//! The oscillator `(z, w)` mimics the near wake of a bluff body; its position
//! `z` feeds the upstream boundary of the far-wake transport equation
//! `v_t + a v_x - mu v_xx = 0` on `(0, 1)`. The design parameter `rho` is the
//! oscillator's damping/amplitude coefficient.

mod advection_vdp;
pub mod banded;
mod objective;

pub use advection_vdp::AdvectionVdp;
pub use objective::TrackingObjective;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Design parameters; one entry (`rho`) for this model.
pub type DesignVector<T> = Vec<T>;

/// Physical, discretization and objective parameters of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig<T> {
    /// Advection speed (must be non-negative: the stencil upwinds to the left).
    pub a: T,
    /// Diffusion coefficient.
    pub mu: T,
    pub dx: T,
    /// Number of spatial unknowns `v_1..v_L` at `x_l = l * dx`.
    pub n_space: usize,
    /// Fine time step.
    pub dt: T,
    /// Number of fine time steps.
    pub n_steps: usize,
    pub t_final: T,
    /// Absolute max-norm tolerance of the per-step functional iteration.
    pub picard_tol: T,
    pub picard_max: usize,
    /// Regularization weight.
    pub gamma: T,
    /// Tracking target for the space-time averaged squared state.
    pub a_target: T,
    /// When false the `z^2` term of the oscillator is frozen to zero, which
    /// makes every step linear in the state.
    pub vdp_nonlinear: bool,
}

impl<T: Real> ModelConfig<T> {
    /// Reference setup: `a = 1`, `mu = 1e-5`, `dx = 0.01`, `L = 100`,
    /// `dt = 5e-4`, `N = 60000`, `T = 30`, `gamma = 1e-6`.
    ///
    /// `a_target` is left at zero; see [`ModelConfig::calibrate_target`].
    pub fn reference() -> Self {
        Self {
            a: T::one(),
            mu: T::lit(1e-5),
            dx: T::lit(0.01),
            n_space: 100,
            dt: T::lit(5e-4),
            n_steps: 60_000,
            t_final: T::lit(30.0),
            picard_tol: T::lit(1e-12),
            picard_max: 100,
            gamma: T::lit(1e-6),
            a_target: T::zero(),
            vdp_nonlinear: true,
        }
    }

    /// Same spatial setup with `n_steps` fine steps of the reference size.
    pub fn with_steps(mut self, n_steps: usize) -> Self {
        self.n_steps = n_steps;
        self.t_final = self.dt * T::from_usize_lossy(n_steps);
        self
    }

    /// Resizes the spatial grid to `n_space` points on `(0, 1]`.
    pub fn with_space(mut self, n_space: usize) -> Self {
        self.n_space = n_space;
        self.dx = T::one() / T::from_usize_lossy(n_space);
        self
    }

    pub fn state_dim(&self) -> usize {
        self.n_space + 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let rel = |x: T, y: T| (x - y).abs() / y.abs().max(T::min_positive_value());
        if !(self.dt > T::zero()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.dx > T::zero()) {
            return bad(format!("dx must be positive, got {}", self.dx));
        }
        if !(self.mu >= T::zero()) {
            return bad(format!("mu must be non-negative, got {}", self.mu));
        }
        if !(self.a >= T::zero()) {
            return bad(format!("advection speed a must be non-negative, got {}", self.a));
        }
        if self.n_space < 3 {
            return bad(format!("need at least 3 spatial points, got {}", self.n_space));
        }
        if self.picard_max == 0 || !(self.picard_tol > T::zero()) {
            return bad("picard_tol must be positive and picard_max at least 1".into());
        }
        let tol = T::lit(1e-12);
        if rel(self.dt * T::from_usize_lossy(self.n_steps), self.t_final) > tol {
            return bad(format!(
                "N * dt = {} does not match T = {}",
                self.dt * T::from_usize_lossy(self.n_steps),
                self.t_final
            ));
        }
        if rel(self.dx * T::from_usize_lossy(self.n_space), T::one()) > tol.max(T::epsilon() * T::lit(8.0)) {
            return bad(format!("L * dx = {} must equal 1", self.dx * T::from_usize_lossy(self.n_space)));
        }
        if !(self.gamma >= T::zero()) || !self.a_target.is_finite() {
            return bad("gamma must be non-negative and a_target finite".into());
        }
        Ok(())
    }

    /// Sets `a_target` to the space-time averaged squared state of the serial
    /// trajectory at `rho_target`, computed with this configuration.
    pub fn calibrate_target(mut self, rho_target: T) -> Result<Self> {
        let stepper = AdvectionVdp::new(self.clone())?;
        let traj = crate::mgrit::serial_solve(&stepper, &[rho_target], self.dt, self.n_steps)?;
        self.a_target = stepper.objective().space_time_average(traj.states());
        Ok(self)
    }
}

/// Typed view of one flat model state `(z, w, v_1..v_L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T> {
    data: Vec<T>,
}

impl<T: Real> ModelState<T> {
    pub fn new(z: T, w: T, v: &[T]) -> Self {
        let mut data = Vec::with_capacity(v.len() + 2);
        data.push(z);
        data.push(w);
        data.extend_from_slice(v);
        Self { data }
    }

    pub fn from_flat(data: Vec<T>) -> Result<Self> {
        if data.len() < 3 {
            return Err(Error::InvalidInput(format!("model state needs at least 3 entries, got {}", data.len())));
        }
        Ok(Self { data })
    }

    pub fn z(&self) -> T {
        self.data[0]
    }

    pub fn w(&self) -> T {
        self.data[1]
    }

    pub fn v(&self) -> &[T] {
        &self.data[2..]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_is_valid() {
        let cfg = ModelConfig::<f64>::reference();
        cfg.validate().unwrap();
        assert_eq!(cfg.state_dim(), 102);
        let short = cfg.clone().with_steps(6000);
        short.validate().unwrap();
        assert!((short.t_final - 3.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_time_grid_rejected() {
        let mut cfg = ModelConfig::<f64>::reference();
        cfg.n_steps = 1000;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let mut cfg = ModelConfig::<f64>::reference();
        cfg.dx = 0.02;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::<f64>::reference();
        cfg.mu = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn state_view() {
        let s = ModelState::new(1.0, 2.0, &[3.0, 4.0, 5.0]);
        assert_eq!((s.z(), s.w()), (1.0, 2.0));
        assert_eq!(s.v(), &[3.0, 4.0, 5.0]);
        assert!(ModelState::from_flat(vec![1.0f64]).is_err());
    }
}
