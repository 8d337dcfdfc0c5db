//! Time-parallel forward and adjoint solvers for time-marching simulations,
//! and the One-shot optimization loop built on them.
//!
//! * [`model`]: Van der Pol oscillator coupled to an advection-diffusion far
//!   field, Crank-Nicolson in time, with its hand-derived adjoint step.
//! * [`mgrit`]: FAS multigrid reduction in time over any [`Stepper`], plus the
//!   exact transpose of one cycle recorded on a [`mgrit::CycleTape`].
//! * [`adjoint`]: piggyback state/adjoint iteration and reduced gradients.
//! * [`optimize`]: One-shot, time-parallel and time-serial reduced-space
//!   optimizers.
//! * [`harness`]: configuration files, experiments and CSV output.
//!
//! The numerics are generic over the scalar type ([`Real`]); the aliases at
//! the crate root fix it to `f64`.

pub mod adjoint;
pub mod error;
pub mod harness;
pub mod mgrit;
pub mod model;
pub mod optimize;
pub mod scalar;
pub mod space_time;
pub mod stepper;
pub mod vector;

pub use error::{DriverError, Error, Result};
pub use scalar::Real;
pub use space_time::{AdjointState, SpaceTimeState};
pub use stepper::{Objective, StepAdjoint, Stepper};

/// Double-precision model stepper.
pub type Model = model::AdvectionVdp<f64>;
pub type ModelConfig = model::ModelConfig<f64>;
pub type TrackingObjective = model::TrackingObjective<f64>;
pub type Trajectory = SpaceTimeState<f64>;
/// Double-precision MGRIT solver for the model problem.
pub type ModelMgrit<'a> = mgrit::Mgrit<'a, f64, Model>;
