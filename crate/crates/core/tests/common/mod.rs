#![allow(dead_code)]

pub mod dense;

use mgrit_oneshot::mgrit::{CoarseOperator, CycleType, MgritConfig, Relaxation};
use mgrit_oneshot::{Model, ModelConfig, SpaceTimeState, Stepper};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALL_CYCLES: [(CycleType, Relaxation); 6] = [
    (CycleType::V, Relaxation::F),
    (CycleType::V, Relaxation::FC),
    (CycleType::V, Relaxation::FCF),
    (CycleType::F, Relaxation::F),
    (CycleType::F, Relaxation::FC),
    (CycleType::F, Relaxation::FCF),
];

/// Model with `n_space` field points and `n_steps` steps of size `dt`.
pub fn model(n_space: usize, n_steps: usize, dt: f64, nonlinear: bool) -> Model {
    let mut cfg = ModelConfig::reference().with_space(n_space);
    cfg.dt = dt;
    cfg = cfg.with_steps(n_steps);
    cfg.vdp_nonlinear = nonlinear;
    Model::new(cfg).unwrap()
}

/// Small model with a calibrated tracking target.
pub fn calibrated(n_space: usize, n_steps: usize, dt: f64, rho_target: f64) -> Model {
    let cfg = model(n_space, n_steps, dt, true).config().clone().calibrate_target(rho_target).unwrap();
    Model::new(cfg).unwrap()
}

pub fn mgrit_config(m: usize, levels: usize, cycle: CycleType, relaxation: Relaxation) -> MgritConfig {
    MgritConfig { m, max_levels: levels, cycle, relaxation, coarse_operator: CoarseOperator::Rediscretized, ..MgritConfig::default() }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random space-time vector with a zero initial slot.
pub fn random_direction(rng: &mut ChaCha8Rng, dim: usize, n_steps: usize) -> SpaceTimeState<f64> {
    let mut pts = vec![vec![0.0; dim]];
    pts.extend((0..n_steps).map(|_| random_vec(rng, dim)));
    SpaceTimeState::from_points(pts)
}

/// `base + s * dir` on every time point after the first.
pub fn shifted(base: &SpaceTimeState<f64>, dir: &SpaceTimeState<f64>, s: f64) -> SpaceTimeState<f64> {
    let mut out = base.clone();
    for (p, d) in out.points_mut().iter_mut().zip(dir.points()).skip(1) {
        for (x, y) in p.iter_mut().zip(d) {
            *x += s * y;
        }
    }
    out
}

pub fn st_dot(a: &SpaceTimeState<f64>, b: &SpaceTimeState<f64>) -> f64 {
    a.points().iter().zip(b.points()).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q)).sum()
}

/// Matrix of a linear stepper, assembled column by column.
pub fn step_matrix(stepper: &Model, design: &[f64], dt: f64) -> DMatrix<f64> {
    let n = stepper.dim();
    let mut phi = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = stepper.step(&e, design, dt).unwrap();
        for i in 0..n {
            phi[(i, j)] = col[i];
        }
    }
    phi
}

/// Stacks all time points, the initial one first, into one column vector.
pub fn stack(u: &SpaceTimeState<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator((u.n_steps() + 1) * u.dim(), u.points().iter().flatten().copied())
}

pub fn unstack(x: &nalgebra::DVector<f64>, dim: usize) -> SpaceTimeState<f64> {
    SpaceTimeState::from_points(x.as_slice().chunks(dim).map(|c| c.to_vec()).collect())
}
