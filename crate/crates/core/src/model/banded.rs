//! Banded matrices with a no-pivoting LU factorization.
//!
//! The Crank-Nicolson system of the advection-diffusion field has two
//! sub-diagonals (second-order upwind) and one super-diagonal (diffusion), and
//! is strongly lower-dominant, so elimination without pivoting is used.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band storage: entry `(i, j)` lives at `i * width + (j + kl - i)`.
    data: Vec<T>,
}

impl<T: Real> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![T::zero(); n * (kl + ku + 1)] }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            T::zero()
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        assert!(i < self.n && j < self.n && self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] = value;
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    /// `alpha * self + beta * I`
    pub fn scaled_plus_identity(&self, alpha: T, beta: T) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = *v * alpha;
        }
        for i in 0..self.n {
            let d = out.get(i, i);
            out.set(i, i, d + beta);
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.cols(i).fold(T::zero(), |acc, j| acc + self.get(i, j) * x[j]))
            .collect()
    }

    pub fn matvec_transpose(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for i in 0..self.n {
            for j in self.cols(i) {
                out[j] = out[j] + self.get(i, j) * y[i];
            }
        }
        out
    }

    pub fn factor(&self) -> Result<BandedLu<T>> {
        let mut lu = self.clone();
        let n = self.n;
        for k in 0..n {
            let pivot = lu.get(k, k);
            if pivot == T::zero() || !pivot.is_finite() {
                return Err(Error::SingularLinearization(format!("zero pivot in row {k}")));
            }
            for i in (k + 1)..(k + self.kl + 1).min(n) {
                let factor = lu.get(i, k) / pivot;
                lu.set(i, k, factor);
                for j in (k + 1)..(k + self.ku + 1).min(n) {
                    let v = lu.get(i, j) - factor * lu.get(k, j);
                    lu.set(i, j, v);
                }
            }
        }
        Ok(BandedLu { lu })
    }
}

/// Packed `L U` factors (unit lower triangle implied).
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    lu: BandedMatrix<T>,
}

impl<T: Real> BandedLu<T> {
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let a = &self.lu;
        let n = a.n;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(a.kl)..i {
                s = s - a.get(i, j) * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..(i + a.ku + 1).min(n) {
                s = s - a.get(i, j) * x[j];
            }
            x[i] = s / a.get(i, i);
        }
        x
    }

    /// Solves `A^T x = rhs`.
    pub fn solve_transpose(&self, rhs: &[T]) -> Vec<T> {
        let a = &self.lu;
        let n = a.n;
        let mut x = rhs.to_vec();
        // U^T y = rhs
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(a.ku)..i {
                s = s - a.get(j, i) * x[j];
            }
            x[i] = s / a.get(i, i);
        }
        // L^T x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..(i + a.kl + 1).min(n) {
                s = s - a.get(j, i) * x[j];
            }
            x[i] = s;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn sample(n: usize) -> BandedMatrix<f64> {
        let mut m = BandedMatrix::zeros(n, 2, 1);
        for i in 0..n {
            m.set(i, i, 3.0 + i as f64 * 0.1);
            if i >= 1 {
                m.set(i, i - 1, -1.2);
            }
            if i >= 2 {
                m.set(i, i - 2, 0.3);
            }
            if i + 1 < n {
                m.set(i, i + 1, -0.05 * (i as f64 + 1.0));
            }
        }
        m
    }

    fn dense(m: &BandedMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.n(), m.n(), |i, j| m.get(i, j))
    }

    #[test]
    fn solves_match_dense() {
        let m = sample(9);
        let d = dense(&m);
        let rhs: Vec<f64> = (0..9).map(|i| (i as f64).sin() + 0.5).collect();
        let lu = m.factor().unwrap();
        let x = lu.solve(&rhs);
        let xt = lu.solve_transpose(&rhs);
        let b = DVector::from_vec(rhs.clone());
        let x_ref = d.clone().lu().solve(&b).unwrap();
        let xt_ref = d.transpose().lu().solve(&b).unwrap();
        for i in 0..9 {
            assert!((x[i] - x_ref[i]).abs() < 1e-14);
            assert!((xt[i] - xt_ref[i]).abs() < 1e-14);
        }
        let y = m.matvec(&x);
        let yt = m.matvec_transpose(&xt);
        for i in 0..9 {
            assert!((y[i] - rhs[i]).abs() < 1e-13);
            assert!((yt[i] - rhs[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let m = BandedMatrix::<f64>::zeros(3, 2, 1);
        assert!(matches!(m.factor(), Err(Error::SingularLinearization(_))));
    }
}
