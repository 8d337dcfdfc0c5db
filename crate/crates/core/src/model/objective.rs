use super::ModelConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stepper::Objective;
use crate::vector;

/// `J = 1/2 (S - a_target)^2 + gamma/2 |rho|^2` with the space-time average
/// `S = 1/N sum_i |u^i|^2` and `|u|^2 = z^2 + w^2 + dx sum_l v_l^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingObjective<T> {
    pub gamma: T,
    pub a_target: T,
    pub dx: T,
}

impl<T: Real> TrackingObjective<T> {
    pub fn new(cfg: &ModelConfig<T>) -> Self {
        Self { gamma: cfg.gamma, a_target: cfg.a_target, dx: cfg.dx }
    }

    /// Weighted squared norm of one state.
    pub fn point_norm_sq(&self, u: &[T]) -> T {
        u[0] * u[0] + u[1] * u[1] + self.dx * vector::dot(&u[2..], &u[2..])
    }

    /// `S`, the time average of the weighted squared norm over `u^1..u^N`.
    pub fn space_time_average(&self, states: &[Vec<T>]) -> T {
        if states.is_empty() {
            return T::zero();
        }
        let parts: Vec<T> = states.iter().map(|u| self.point_norm_sq(u)).collect();
        vector::ordered_sum(&parts) / T::from_usize_lossy(states.len())
    }

    /// Gradient with respect to the single state `u^i` (1-based).
    pub fn grad_state_at(&self, states: &[Vec<T>], i: usize) -> Vec<T> {
        let outer = self.outer_factor(states);
        self.weighted(&states[i - 1], outer)
    }

    /// `2 (S - a_target) / N`, the factor shared by every state gradient.
    fn outer_factor(&self, states: &[Vec<T>]) -> T {
        let s = self.space_time_average(states);
        T::lit(2.0) * (s - self.a_target) / T::from_usize_lossy(states.len().max(1))
    }

    fn weighted(&self, u: &[T], factor: T) -> Vec<T> {
        let mut g: Vec<T> = u.iter().map(|&x| x * factor * self.dx).collect();
        g[0] = u[0] * factor;
        g[1] = u[1] * factor;
        g
    }
}

impl<T: Real> Objective<T> for TrackingObjective<T> {
    fn value(&self, states: &[Vec<T>], design: &[T]) -> Result<T> {
        if !states.iter().all(|u| vector::all_finite(u)) || !vector::all_finite(design) {
            return Err(Error::NonFinite("objective input"));
        }
        let mismatch = self.space_time_average(states) - self.a_target;
        let half = T::lit(0.5);
        Ok(half * mismatch * mismatch + half * self.gamma * vector::dot(design, design))
    }

    fn grad_state(&self, states: &[Vec<T>], _design: &[T]) -> Vec<Vec<T>> {
        let outer = self.outer_factor(states);
        states.iter().map(|u| self.weighted(u, outer)).collect()
    }

    fn grad_design(&self, _states: &[Vec<T>], design: &[T]) -> Vec<T> {
        design.iter().map(|&r| self.gamma * r).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn objective(a_target: f64) -> TrackingObjective<f64> {
        TrackingObjective { gamma: 1e-6, a_target, dx: 0.25 }
    }

    fn random_states(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..6).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect()
    }

    #[test]
    fn vanishes_on_target_without_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let states = random_states(&mut rng, 5);
        let target = objective(0.0).space_time_average(&states);
        let obj = objective(target);
        assert_eq!(obj.value(&states, &[0.0]).unwrap(), 0.0);
        assert!(obj.grad_state(&states, &[0.0]).iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn design_gradient_is_regularization() {
        let obj = objective(0.0);
        assert_eq!(obj.grad_design(&[], &[0.0]), vec![0.0]);
        assert!((obj.grad_design(&[], &[3.0])[0] - 3e-6).abs() < 1e-20);
        // central differences of the quadratic regularization are exact up to roundoff
        let states = vec![vec![1.0; 6]];
        let eps = 1e-3;
        let fd = (obj.value(&states, &[3.0 + eps]).unwrap() - obj.value(&states, &[3.0 - eps]).unwrap()) / (2.0 * eps);
        assert!((fd - 3e-6).abs() <= 1e-10);
    }

    #[test]
    fn state_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let states = random_states(&mut rng, 4);
        let obj = objective(0.3);
        let grad = obj.grad_state(&states, &[2.0]);
        let eps = 1e-6;
        for i in 0..states.len() {
            assert_eq!(obj.grad_state_at(&states, i + 1), grad[i]);
            for k in 0..6 {
                let mut plus = states.clone();
                let mut minus = states.clone();
                plus[i][k] += eps;
                minus[i][k] -= eps;
                let fd = (obj.value(&plus, &[2.0]).unwrap() - obj.value(&minus, &[2.0]).unwrap()) / (2.0 * eps);
                let err = (fd - grad[i][k]).abs() / grad[i][k].abs().max(1e-12);
                assert!(err <= 1e-7, "({i},{k}): fd {fd} vs {}", grad[i][k]);
            }
        }
    }

    #[test]
    fn gradient_scales_with_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let states = random_states(&mut rng, 3);
        let s = objective(0.0).space_time_average(&states);
        let g1 = objective(s - 0.1).grad_state(&states, &[1.0]);
        let g2 = objective(s - 0.2).grad_state(&states, &[1.0]);
        for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn non_finite_input_detected() {
        let obj = objective(0.0);
        assert!(obj.value(&[vec![f64::NAN; 6]], &[1.0]).is_err());
    }
}
