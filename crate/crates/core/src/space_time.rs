//! Space-time containers: every time point of a trajectory in one place.

use crate::scalar::Real;
use crate::vector;

/// Discrete trajectory `u^0, u^1, ..., u^N`.
///
/// Index 0 holds the fixed initial condition; solvers never modify it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeState<T> {
    points: Vec<Vec<T>>,
}

impl<T: Real> SpaceTimeState<T> {
    pub fn from_points(points: Vec<Vec<T>>) -> Self {
        assert!(!points.is_empty(), "trajectory needs at least the initial condition");
        let dim = points[0].len();
        assert!(points.iter().all(|p| p.len() == dim), "non-conformant states");
        Self { points }
    }

    /// Cold start: the initial condition copied to all `n_steps + 1` points.
    pub fn broadcast(initial: &[T], n_steps: usize) -> Self {
        Self { points: vec![initial.to_vec(); n_steps + 1] }
    }

    pub fn zeros(dim: usize, n_steps: usize) -> Self {
        Self { points: vec![vec![T::zero(); dim]; n_steps + 1] }
    }

    pub fn n_steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn initial(&self) -> &[T] {
        &self.points[0]
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.points[i]
    }

    /// All points including the initial condition.
    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [Vec<T>] {
        &mut self.points
    }

    /// `u^1..u^N`, the layout consumed by [`crate::stepper::Objective`].
    pub fn states(&self) -> &[Vec<T>] {
        &self.points[1..]
    }

    pub fn into_points(self) -> Vec<Vec<T>> {
        self.points
    }

    /// Euclidean norm of `self - other` over `u^1..u^N`.
    pub fn diff_norm(&self, other: &Self) -> T {
        let parts: Vec<T> = self.points[1..]
            .iter()
            .zip(&other.points[1..])
            .map(|(a, b)| a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y)))
            .collect();
        vector::ordered_sum(&parts).sqrt()
    }

    /// Max-norm of `self - other` over every point.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.points
            .iter()
            .zip(&other.points)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x - y).abs()))
            .fold(T::zero(), T::max)
    }

    /// Euclidean norm over `u^1..u^N`.
    pub fn norm(&self) -> T {
        let parts: Vec<T> = self.points[1..].iter().map(|p| vector::dot(p, p)).collect();
        vector::ordered_sum(&parts).sqrt()
    }
}

/// Adjoint trajectory `bar u^1..bar u^N`, stored with the same layout as
/// [`SpaceTimeState`]. Slot 0 is unused and kept at zero; the terminal value
/// `bar u^{N+1}` is implicitly zero.
pub type AdjointState<T> = SpaceTimeState<T>;
