//! Convergence histories and the contraction-rate estimate derived from them.

use crate::error::{Error, Result};

/// One iteration of a fixed-point solver.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|u_{k+1} - u_k|_2`
    pub state_residual: f64,
    /// `|bar u_{k+1} - bar u_k|_2`, when an adjoint is iterated.
    pub adjoint_residual: Option<f64>,
    pub gradient_norm: Option<f64>,
    pub objective: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceRecord {
    pub iterations: Vec<IterationRecord>,
}

impl ConvergenceRecord {
    pub fn push(&mut self, mut entry: IterationRecord) {
        entry.iteration = self.iterations.len();
        self.iterations.push(entry);
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn state_residuals(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.state_residual).collect()
    }

    pub fn adjoint_residuals(&self) -> Vec<f64> {
        self.iterations.iter().filter_map(|r| r.adjoint_residual).collect()
    }

    /// Residuals divided by the first entry.
    pub fn relative(residuals: &[f64]) -> Vec<f64> {
        match residuals.first() {
            Some(&r0) if r0 > 0.0 => residuals.iter().map(|r| r / r0).collect(),
            _ => residuals.to_vec(),
        }
    }

    /// Largest observed `|bar u_{k+1} - bar u_k| / |u_{k+1} - u_k|` from
    /// iteration `from` on; an empirical stand-in for the adjoint time-lag
    /// constant.
    pub fn time_lag_estimate(&self, from: usize) -> Option<f64> {
        self.iterations
            .iter()
            .skip(from)
            .filter_map(|r| match r.adjoint_residual {
                Some(a) if r.state_residual > 0.0 => Some(a / r.state_residual),
                _ => None,
            })
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionEstimate {
    pub eta: f64,
    /// Set when `eta` is at or above [`STAGNATION_THRESHOLD`].
    pub stagnating: bool,
}

pub const STAGNATION_THRESHOLD: f64 = 0.99;

/// Geometric mean of successive residual ratios over the tail half of the
/// history.
pub fn estimate_contraction(residuals: &[f64]) -> Result<ContractionEstimate> {
    if residuals.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: residuals.len() });
    }
    let n_ratios = residuals.len() - 1;
    let tail = n_ratios.div_ceil(2);
    let start = residuals.len() - 1 - tail;
    let (first, last) = (residuals[start], residuals[residuals.len() - 1]);
    let eta = if first <= 0.0 || last <= 0.0 {
        0.0
    } else {
        (last / first).powf(1.0 / tail as f64)
    };
    Ok(ContractionEstimate { eta, stagnating: eta >= STAGNATION_THRESHOLD })
}
