use crate::error::{Error, Result};
use crate::scalar::Real;

/// One time grid of the multilevel hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeLevel<T> {
    /// Number of time points, including the initial one.
    pub n_points: usize,
    /// Step size `m^level * dt`.
    pub dt: T,
    /// Fine steps spanned by one step on this level (`m^level`).
    pub stride: usize,
}

/// Nested time grids: level `l + 1` keeps the points of level `l` whose
/// index is a multiple of the coarsening factor.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalHierarchy<T> {
    levels: Vec<TimeLevel<T>>,
    m: usize,
    max_levels: usize,
}

impl<T: Real> TemporalHierarchy<T> {
    /// Coarsens while the current level has more than `m` points and fewer
    /// than `max_levels` levels exist.
    pub fn build(n_steps: usize, m: usize, max_levels: usize, dt: T) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidConfig(format!("coarsening factor must be at least 2, got {m}")));
        }
        if n_steps < 1 {
            return Err(Error::InvalidConfig("need at least one time step".into()));
        }
        if max_levels < 1 {
            return Err(Error::InvalidConfig("max_levels must be at least 1".into()));
        }
        let mut levels = vec![TimeLevel { n_points: n_steps + 1, dt, stride: 1 }];
        loop {
            let last = levels.last().expect("non-empty");
            if last.n_points <= m || levels.len() >= max_levels {
                break;
            }
            let next = TimeLevel {
                n_points: (last.n_points - 1) / m + 1,
                dt: last.dt * T::from_usize_lossy(m),
                stride: last.stride * m,
            };
            levels.push(next);
        }
        Ok(Self { levels, m, max_levels })
    }

    pub fn levels(&self) -> &[TimeLevel<T>] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &TimeLevel<T> {
        &self.levels[l]
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn coarsest(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn coarsening_factor(&self) -> usize {
        self.m
    }

    pub fn max_levels(&self) -> usize {
        self.max_levels
    }

    /// Whether point `j` of a non-coarsest level survives to the next level.
    pub fn is_c_point(&self, j: usize) -> bool {
        j % self.m == 0
    }
}
