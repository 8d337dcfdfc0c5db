//! Dense block-matrix MGRIT for linear steppers: every operation is written
//! against the assembled space-time matrix instead of step sweeps.

use mgrit_oneshot::mgrit::{CycleType, Relaxation};
use nalgebra::{DMatrix, DVector};

pub struct DenseMgrit {
    /// Step matrix per level.
    pub phi: Vec<DMatrix<f64>>,
    /// Time points per level, including the initial one.
    pub n_points: Vec<usize>,
    pub m: usize,
    pub dim: usize,
    pub cycle: CycleType,
    pub relaxation: Relaxation,
}

impl DenseMgrit {
    pub fn levels(&self) -> usize {
        self.n_points.len()
    }

    /// Block lower bidiagonal matrix with identity diagonal and `-phi` below.
    pub fn system(&self, level: usize) -> DMatrix<f64> {
        let (n, d) = (self.n_points[level], self.dim);
        let mut a = DMatrix::identity(n * d, n * d);
        for i in 1..n {
            a.view_mut((i * d, (i - 1) * d), (d, d)).copy_from(&(-&self.phi[level]));
        }
        a
    }

    /// Block indices of C-points (multiples of `m`, including 0) and F-points.
    fn split(&self, level: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.n_points[level]).partition(|i| i % self.m == 0)
    }

    fn rows(&self, blocks: &[usize]) -> Vec<usize> {
        blocks.iter().flat_map(|&b| (b * self.dim)..((b + 1) * self.dim)).collect()
    }

    /// Solves the rows of `set` for the unknowns of `set`, the others fixed.
    fn block_solve(&self, level: usize, u: &mut DVector<f64>, g: &DVector<f64>, set: &[usize]) {
        if set.is_empty() {
            return;
        }
        let a = self.system(level);
        let rows = self.rows(set);
        let all: Vec<usize> = (0..u.len()).collect();
        let others: Vec<usize> = all.iter().copied().filter(|i| !rows.contains(i)).collect();
        let a_ss = a.select_rows(&rows).select_columns(&rows);
        let a_so = a.select_rows(&rows).select_columns(&others);
        let rhs = g.select_rows(&rows) - a_so * u.select_rows(&others);
        let x = a_ss.lu().solve(&rhs).expect("non-singular block");
        for (k, &r) in rows.iter().enumerate() {
            u[r] = x[k];
        }
    }

    pub fn f_relax(&self, level: usize, u: &mut DVector<f64>, g: &DVector<f64>) {
        let (_, f) = self.split(level);
        self.block_solve(level, u, g, &f);
    }

    pub fn c_relax(&self, level: usize, u: &mut DVector<f64>, g: &DVector<f64>) {
        let (c, _) = self.split(level);
        self.block_solve(level, u, g, &c);
    }

    pub fn residual(&self, level: usize, u: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
        g - self.system(level) * u
    }

    /// Injection onto the next level.
    pub fn inject(&self, level: usize, u: &DVector<f64>) -> DVector<f64> {
        let (c, _) = self.split(level);
        let c: Vec<usize> = c.into_iter().take(self.n_points[level + 1]).collect();
        u.select_rows(&self.rows(&c))
    }

    /// FAS coarse right-hand side `R r + A_c R u`.
    pub fn coarse_rhs(&self, level: usize, u: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
        let ru = self.inject(level, u);
        self.inject(level, &self.residual(level, u, g)) + self.system(level + 1) * ru
    }

    pub fn solve(&self, level: usize, g: &DVector<f64>) -> DVector<f64> {
        self.system(level).lu().solve(g).expect("non-singular system")
    }

    pub fn cycle_level(&self, level: usize, u: &mut DVector<f64>, g: &DVector<f64>, kind: CycleType) {
        if level + 1 == self.levels() {
            *u = self.solve(level, g);
            return;
        }
        self.f_relax(level, u, g);
        if matches!(self.relaxation, Relaxation::FC | Relaxation::FCF) {
            self.c_relax(level, u, g);
        }
        if self.relaxation == Relaxation::FCF {
            self.f_relax(level, u, g);
        }
        let ru = self.inject(level, u);
        let gc = self.coarse_rhs(level, u, g);
        let mut v = ru.clone();
        self.cycle_level(level + 1, &mut v, &gc, kind);
        if kind == CycleType::F && level + 2 < self.levels() {
            self.cycle_level(level + 1, &mut v, &gc, CycleType::V);
        }
        let (c, _) = self.split(level);
        let corr = v - ru;
        for (j, &b) in c.iter().take(self.n_points[level + 1]).enumerate() {
            for k in 0..self.dim {
                u[b * self.dim + k] += corr[j * self.dim + k];
            }
        }
        self.f_relax(level, u, g);
    }

    /// One cycle on the fine system `A u = (u0, 0, ..., 0)`.
    pub fn cycle(&self, u: &DVector<f64>, u0: &[f64]) -> DVector<f64> {
        let mut u = u.clone();
        let mut g = DVector::zeros(u.len());
        for k in 0..self.dim {
            u[k] = u0[k];
            g[k] = u0[k];
        }
        self.cycle_level(0, &mut u, &g, self.cycle);
        u
    }
}
