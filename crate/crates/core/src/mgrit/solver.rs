use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use super::hierarchy::TemporalHierarchy;
use super::record::{ConvergenceRecord, IterationRecord};
use super::tape::{CycleTape, IntervalRecord, StepRecord, TapePhase};
use super::{CoarseOperator, CycleType, MgritConfig, Relaxation};
use crate::error::{DriverError, Error, Result};
use crate::scalar::Real;
use crate::space_time::{AdjointState, SpaceTimeState};
use crate::stepper::Stepper;
use crate::vector;

/// Machine-independent cost counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostSnapshot {
    /// Forward step applications per level.
    pub primal_steps: Vec<u64>,
    /// Transposed step applications per level.
    pub adjoint_steps: Vec<u64>,
    pub cycles: u64,
    pub transpose_cycles: u64,
}

impl CostSnapshot {
    /// All step applications, forward and transposed, across all levels.
    pub fn serial_equivalent_steps(&self) -> u64 {
        self.primal_steps.iter().chain(&self.adjoint_steps).sum()
    }
}

#[derive(Debug)]
struct Counters {
    primal: Vec<AtomicU64>,
    adjoint: Vec<AtomicU64>,
    cycles: AtomicU64,
    transpose_cycles: AtomicU64,
}

impl Counters {
    fn new(levels: usize) -> Self {
        Self {
            primal: (0..levels).map(|_| AtomicU64::new(0)).collect(),
            adjoint: (0..levels).map(|_| AtomicU64::new(0)).collect(),
            cycles: AtomicU64::new(0),
            transpose_cycles: AtomicU64::new(0),
        }
    }
}

/// Per-level working arrays of one cycle.
struct LevelData<T> {
    u: Vec<Vec<T>>,
    /// FAS right-hand side; absent on the finest level.
    rhs: Option<Vec<Vec<T>>>,
    /// Injected values at restriction time, needed for the correction.
    injected: Vec<Vec<T>>,
}

/// Multigrid-reduction-in-time solver over any [`Stepper`].
pub struct Mgrit<'a, T: Real, S: Stepper<T>> {
    stepper: &'a S,
    hierarchy: TemporalHierarchy<T>,
    config: MgritConfig,
    pool: rayon::ThreadPool,
    counters: Counters,
}

impl<'a, T: Real, S: Stepper<T>> Mgrit<'a, T, S> {
    pub fn new(stepper: &'a S, dt: T, n_steps: usize, config: MgritConfig) -> Result<Self> {
        config.validate()?;
        let hierarchy = TemporalHierarchy::build(n_steps, config.m, config.max_levels, dt)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        let counters = Counters::new(hierarchy.n_levels());
        Ok(Self { stepper, hierarchy, config, pool, counters })
    }

    pub fn stepper(&self) -> &S {
        self.stepper
    }

    pub fn hierarchy(&self) -> &TemporalHierarchy<T> {
        &self.hierarchy
    }

    pub fn config(&self) -> &MgritConfig {
        &self.config
    }

    pub fn n_steps(&self) -> usize {
        self.hierarchy.level(0).n_points - 1
    }

    pub fn fine_dt(&self) -> T {
        self.hierarchy.level(0).dt
    }

    /// Broadcast of the initial condition to every time point.
    pub fn initial_guess(&self) -> SpaceTimeState<T> {
        SpaceTimeState::broadcast(&self.stepper.initial_state(), self.n_steps())
    }

    pub fn costs(&self) -> CostSnapshot {
        let load = |v: &[AtomicU64]| v.iter().map(|c| c.load(Ordering::Relaxed)).collect();
        CostSnapshot {
            primal_steps: load(&self.counters.primal),
            adjoint_steps: load(&self.counters.adjoint),
            cycles: self.counters.cycles.load(Ordering::Relaxed),
            transpose_cycles: self.counters.transpose_cycles.load(Ordering::Relaxed),
        }
    }

    /// Minimum number of items per parallel task so that the work splits
    /// into one contiguous chunk per worker.
    fn chunk_len(&self, n_items: usize) -> usize {
        n_items.div_ceil(self.config.workers).max(1)
    }

    // ---------------------------------------------------------------- steps

    /// One step of `level` from `prev`; returns the record of fine-step
    /// inputs when `record` is set.
    fn propagate(&self, level: usize, prev: &[T], design: &[T], record: bool) -> Result<(Vec<T>, Option<StepRecord<T>>)> {
        let lvl = self.hierarchy.level(level);
        let composed = level > 0 && self.config.coarse_operator == CoarseOperator::Composed;
        let (n_sub, dt) = if composed { (lvl.stride, self.fine_dt()) } else { (1, lvl.dt) };
        let mut inputs = Vec::with_capacity(if record { n_sub } else { 0 });
        let mut state = prev.to_vec();
        for _ in 0..n_sub {
            let next = self.stepper.step(&state, design, dt)?;
            if record {
                inputs.push(std::mem::replace(&mut state, next));
            } else {
                state = next;
            }
        }
        self.counters.primal[level].fetch_add(n_sub as u64, Ordering::Relaxed);
        Ok((state, record.then_some(StepRecord { dt, inputs })))
    }

    /// Transposed propagation: returns `(d out / d prev)^T bar` and the
    /// design contribution.
    fn propagate_transpose(&self, level: usize, rec: &StepRecord<T>, design: &[T], bar: Vec<T>) -> Result<(Vec<T>, Vec<T>)> {
        let mut bar = bar;
        let mut design_bar = vec![T::zero(); design.len()];
        for input in rec.inputs.iter().rev() {
            let adj = self.stepper.step_adjoint(input, design, rec.dt, &bar)?;
            bar = adj.state;
            vector::add_assign(&mut design_bar, &adj.design);
        }
        self.counters.adjoint[level].fetch_add(rec.inputs.len() as u64, Ordering::Relaxed);
        Ok((bar, design_bar))
    }

    // ----------------------------------------------------------- relaxation

    /// F-relaxation on `level`: each coarse interval is propagated from its
    /// C-point through its F-points. Intervals are independent.
    pub fn f_relax(&self, level: usize, u: &mut [Vec<T>], rhs: Option<&[Vec<T>]>, design: &[T]) -> Result<()> {
        self.f_relax_impl(level, u, rhs, design, None)
    }

    /// C-relaxation on `level`: every C-point after the first is recomputed
    /// from its preceding F-point.
    pub fn c_relax(&self, level: usize, u: &mut [Vec<T>], rhs: Option<&[Vec<T>]>, design: &[T]) -> Result<()> {
        self.c_relax_impl(level, u, rhs, design, None)
    }

    pub fn fcf_relax(&self, level: usize, u: &mut [Vec<T>], rhs: Option<&[Vec<T>]>, design: &[T]) -> Result<()> {
        self.f_relax(level, u, rhs, design)?;
        self.c_relax(level, u, rhs, design)?;
        self.f_relax(level, u, rhs, design)
    }

    fn f_relax_impl(
        &self,
        level: usize,
        u: &mut [Vec<T>],
        rhs: Option<&[Vec<T>]>,
        design: &[T],
        tape: Option<&mut Vec<TapePhase<T>>>,
    ) -> Result<()> {
        let m = self.hierarchy.coarsening_factor();
        let record = tape.is_some();
        let n_intervals = u.len().div_ceil(m);
        let min_len = self.chunk_len(n_intervals);
        let intervals: Vec<Option<IntervalRecord<T>>> = self.pool.install(|| {
            u.par_chunks_mut(m)
                .enumerate()
                .with_min_len(min_len)
                .map(|(k, chunk)| {
                    let start = k * m;
                    let mut steps = Vec::new();
                    for i in 1..chunk.len() {
                        let (mut next, rec) = self.propagate(level, &chunk[i - 1], design, record)?;
                        if let Some(g) = rhs {
                            vector::add_assign(&mut next, &g[start + i]);
                        }
                        chunk[i] = next;
                        steps.extend(rec);
                    }
                    Ok(record.then_some(IntervalRecord { start, steps }))
                })
                .collect::<Result<_>>()
        })?;
        if let Some(tape) = tape {
            tape.push(TapePhase::FRelax { level, intervals: intervals.into_iter().flatten().collect() });
        }
        Ok(())
    }

    fn c_relax_impl(
        &self,
        level: usize,
        u: &mut [Vec<T>],
        rhs: Option<&[Vec<T>]>,
        design: &[T],
        tape: Option<&mut Vec<TapePhase<T>>>,
    ) -> Result<()> {
        let m = self.hierarchy.coarsening_factor();
        let record = tape.is_some();
        let c_points: Vec<usize> = (m..u.len()).step_by(m).collect();
        let min_len = self.chunk_len(c_points.len());
        let shared: &[Vec<T>] = u;
        let updates: Vec<(Vec<T>, Option<StepRecord<T>>)> = self.pool.install(|| {
            c_points
                .par_iter()
                .with_min_len(min_len)
                .map(|&c| {
                    let (mut next, rec) = self.propagate(level, &shared[c - 1], design, record)?;
                    if let Some(g) = rhs {
                        vector::add_assign(&mut next, &g[c]);
                    }
                    Ok((next, rec))
                })
                .collect::<Result<_>>()
        })?;
        let mut records = Vec::new();
        for (&c, (next, rec)) in c_points.iter().zip(updates) {
            u[c] = next;
            if let Some(rec) = rec {
                records.push((c, rec));
            }
        }
        if let Some(tape) = tape {
            tape.push(TapePhase::CRelax { level, points: records });
        }
        Ok(())
    }

    fn relax_impl(
        &self,
        level: usize,
        u: &mut [Vec<T>],
        rhs: Option<&[Vec<T>]>,
        design: &[T],
        mut tape: Option<&mut Vec<TapePhase<T>>>,
    ) -> Result<()> {
        self.f_relax_impl(level, u, rhs, design, tape.as_deref_mut())?;
        if matches!(self.config.relaxation, Relaxation::FC | Relaxation::FCF) {
            self.c_relax_impl(level, u, rhs, design, tape.as_deref_mut())?;
        }
        if self.config.relaxation == Relaxation::FCF {
            self.f_relax_impl(level, u, rhs, design, tape)?;
        }
        Ok(())
    }

    // --------------------------------------------------------- level transfer

    /// FAS restriction from `fine_level`: returns the injected coarse state
    /// and the coarse right-hand side
    /// `g_c[j] = (g[mj] + step(u[mj-1]) - u[mj]) + (u[mj] - step_c(u[m(j-1)]))`.
    pub fn restrict_fas(
        &self,
        fine_level: usize,
        u: &[Vec<T>],
        rhs: Option<&[Vec<T>]>,
        design: &[T],
    ) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
        self.restrict_impl(fine_level, u, rhs, design, None)
    }

    fn restrict_impl(
        &self,
        fine_level: usize,
        u: &[Vec<T>],
        rhs: Option<&[Vec<T>]>,
        design: &[T],
        tape: Option<&mut Vec<TapePhase<T>>>,
    ) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
        if fine_level >= self.hierarchy.coarsest() {
            return Err(Error::InvalidInput(format!("level {fine_level} has no coarser level")));
        }
        let m = self.hierarchy.coarsening_factor();
        let coarse_level = fine_level + 1;
        let n_coarse = self.hierarchy.level(coarse_level).n_points;
        let record = tape.is_some();
        let min_len = self.chunk_len(n_coarse);
        let per_point: Vec<(Vec<T>, Option<(StepRecord<T>, StepRecord<T>)>)> = self.pool.install(|| {
            (1..n_coarse)
                .into_par_iter()
                .with_min_len(min_len)
                .map(|j| {
                    let (fine_step, rec_f) = self.propagate(fine_level, &u[m * j - 1], design, record)?;
                    let (coarse_step, rec_c) = self.propagate(coarse_level, &u[m * (j - 1)], design, record)?;
                    let own = &u[m * j];
                    let mut g = vec![T::zero(); own.len()];
                    for k in 0..own.len() {
                        let base = rhs.map_or(T::zero(), |r| r[m * j][k]);
                        let residual = base + fine_step[k] - own[k];
                        let tau = own[k] - coarse_step[k];
                        g[k] = residual + tau;
                    }
                    Ok((g, rec_f.zip(rec_c)))
                })
                .collect::<Result<_>>()
        })?;
        let coarse_u: Vec<Vec<T>> = (0..n_coarse).map(|j| u[m * j].clone()).collect();
        let mut coarse_rhs = Vec::with_capacity(n_coarse);
        coarse_rhs.push(vec![T::zero(); u[0].len()]);
        let mut records = Vec::new();
        for (j, (g, rec)) in per_point.into_iter().enumerate() {
            coarse_rhs.push(g);
            if let Some((rf, rc)) = rec {
                records.push((j + 1, rf, rc));
            }
        }
        if let Some(tape) = tape {
            tape.push(TapePhase::Restrict { level: fine_level, points: records });
        }
        Ok((coarse_u, coarse_rhs))
    }

    /// Sequential solve `u[j] = step(u[j-1]) + g[j]` on `level`.
    pub fn coarse_solve(&self, level: usize, u: &mut [Vec<T>], rhs: Option<&[Vec<T>]>, design: &[T]) -> Result<()> {
        self.coarse_solve_impl(level, u, rhs, design, None)
    }

    fn coarse_solve_impl(
        &self,
        level: usize,
        u: &mut [Vec<T>],
        rhs: Option<&[Vec<T>]>,
        design: &[T],
        tape: Option<&mut Vec<TapePhase<T>>>,
    ) -> Result<()> {
        let record = tape.is_some();
        let mut steps = Vec::new();
        for j in 1..u.len() {
            let (mut next, rec) = self.propagate(level, &u[j - 1], design, record)?;
            if let Some(g) = rhs {
                vector::add_assign(&mut next, &g[j]);
            }
            u[j] = next;
            steps.extend(rec);
        }
        if let Some(tape) = tape {
            tape.push(TapePhase::CoarseSolve { level, steps });
        }
        Ok(())
    }

    fn correct(&self, fine_level: usize, fine: &mut [Vec<T>], coarse: &LevelData<T>, tape: Option<&mut Vec<TapePhase<T>>>) {
        let m = self.hierarchy.coarsening_factor();
        for j in 1..coarse.u.len() {
            let target = &mut fine[m * j];
            for k in 0..target.len() {
                target[k] = target[k] + (coarse.u[j][k] - coarse.injected[j][k]);
            }
        }
        if let Some(tape) = tape {
            tape.push(TapePhase::Correct { level: fine_level });
        }
    }

    // ---------------------------------------------------------------- cycles

    fn cycle_level(
        &self,
        levels: &mut [LevelData<T>],
        level: usize,
        kind: CycleType,
        design: &[T],
        mut tape: Option<&mut Vec<TapePhase<T>>>,
    ) -> Result<()> {
        if level == self.hierarchy.coarsest() {
            let data = &mut levels[level];
            return self.coarse_solve_impl(level, &mut data.u, data.rhs.as_deref(), design, tape);
        }
        {
            let data = &mut levels[level];
            self.relax_impl(level, &mut data.u, data.rhs.as_deref(), design, tape.as_deref_mut())?;
        }
        let (coarse_u, coarse_rhs) = {
            let data = &levels[level];
            self.restrict_impl(level, &data.u, data.rhs.as_deref(), design, tape.as_deref_mut())?
        };
        levels[level + 1] = LevelData { injected: coarse_u.clone(), u: coarse_u, rhs: Some(coarse_rhs) };

        let next_is_coarsest = level + 1 == self.hierarchy.coarsest();
        match kind {
            CycleType::V => self.cycle_level(levels, level + 1, CycleType::V, design, tape.as_deref_mut())?,
            CycleType::F => {
                self.cycle_level(levels, level + 1, CycleType::F, design, tape.as_deref_mut())?;
                if !next_is_coarsest {
                    self.cycle_level(levels, level + 1, CycleType::V, design, tape.as_deref_mut())?;
                }
            }
        }

        let (head, tail) = levels.split_at_mut(level + 1);
        self.correct(level, &mut head[level].u, &tail[0], tape.as_deref_mut());
        let data = &mut levels[level];
        self.f_relax_impl(level, &mut data.u, data.rhs.as_deref(), design, tape)
    }

    fn check_shape(&self, u: &SpaceTimeState<T>) -> Result<()> {
        if u.n_steps() != self.n_steps() || u.dim() != self.stepper.dim() {
            return Err(Error::InvalidInput(format!(
                "state has {} steps of dimension {}, solver expects {} of dimension {}",
                u.n_steps(),
                u.dim(),
                self.n_steps(),
                self.stepper.dim()
            )));
        }
        Ok(())
    }

    fn run_cycle(&self, u: &SpaceTimeState<T>, design: &[T], tape: Option<&mut Vec<TapePhase<T>>>) -> Result<SpaceTimeState<T>> {
        self.check_shape(u)?;
        let mut points = u.points().to_vec();
        points[0] = self.stepper.initial_state();
        let mut levels: Vec<LevelData<T>> = (0..self.hierarchy.n_levels())
            .map(|_| LevelData { u: Vec::new(), rhs: None, injected: Vec::new() })
            .collect();
        levels[0].u = points;
        self.cycle_level(&mut levels, 0, self.config.cycle, design, tape)?;
        self.counters.cycles.fetch_add(1, Ordering::Relaxed);
        let out = std::mem::take(&mut levels[0].u);
        Ok(SpaceTimeState::from_points(out))
    }

    /// One MGRIT cycle, `H(u, design)`.
    pub fn cycle(&self, u: &SpaceTimeState<T>, design: &[T]) -> Result<SpaceTimeState<T>> {
        self.run_cycle(u, design, None)
    }

    /// One MGRIT cycle that also records the tape of its primitive actions.
    pub fn cycle_taped(&self, u: &SpaceTimeState<T>, design: &[T]) -> Result<(SpaceTimeState<T>, CycleTape<T>)> {
        let mut tape = CycleTape::new(self.n_steps(), self.stepper.dim(), design);
        let out = self.run_cycle(u, design, Some(&mut tape.phases))?;
        Ok((out, tape))
    }

    // ------------------------------------------------------------- transpose

    /// Applies `(d H / d u)^T` and `(d H / d design)^T` to `seed` by sweeping
    /// the tape backwards. Returns the state adjoint (slot 0 zero) and the
    /// design adjoint.
    pub fn transpose_cycle(&self, tape: &CycleTape<T>, seed: &AdjointState<T>) -> Result<(AdjointState<T>, Vec<T>)> {
        if tape.n_steps != self.n_steps() || tape.dim != self.stepper.dim() {
            return Err(Error::TapeMismatch(format!(
                "tape recorded {} steps of dimension {}, solver has {} of dimension {}",
                tape.n_steps,
                tape.dim,
                self.n_steps(),
                self.stepper.dim()
            )));
        }
        if seed.n_steps() != tape.n_steps || seed.dim() != tape.dim {
            return Err(Error::TapeMismatch("adjoint seed shape differs from the tape".into()));
        }
        let design = tape.design.as_slice();
        let dim = tape.dim;
        let zeros = |n: usize| vec![vec![T::zero(); dim]; n];
        let n_levels = self.hierarchy.n_levels();
        let mut bar_u: Vec<Vec<Vec<T>>> = (0..n_levels).map(|l| zeros(self.hierarchy.level(l).n_points)).collect();
        let mut bar_rhs: Vec<Vec<Vec<T>>> = bar_u.clone();
        let mut bar_injected: Vec<Vec<Vec<T>>> = bar_u.clone();
        bar_u[0] = seed.points().to_vec();
        bar_u[0][0] = vec![T::zero(); dim];
        let mut design_bar = vec![T::zero(); design.len()];
        let m = self.hierarchy.coarsening_factor();

        for phase in tape.phases.iter().rev() {
            match phase {
                TapePhase::Correct { level } => {
                    let (fine, coarse) = bar_u.split_at_mut(level + 1);
                    let n_coarse = coarse[0].len();
                    for j in 1..n_coarse {
                        let y = &fine[*level][m * j];
                        vector::add_assign(&mut coarse[0][j], y);
                        vector::sub_assign(&mut bar_injected[level + 1][j], y);
                    }
                }
                TapePhase::CoarseSolve { level, steps } => {
                    let level = *level;
                    let has_rhs = level > 0;
                    for j in (1..=steps.len()).rev() {
                        let y = std::mem::replace(&mut bar_u[level][j], vec![T::zero(); dim]);
                        if has_rhs {
                            vector::add_assign(&mut bar_rhs[level][j], &y);
                        }
                        let (a, r) = self.propagate_transpose(level, &steps[j - 1], design, y)?;
                        vector::add_assign(&mut bar_u[level][j - 1], &a);
                        vector::add_assign(&mut design_bar, &r);
                    }
                }
                TapePhase::FRelax { level, intervals } => {
                    let level = *level;
                    let has_rhs = level > 0;
                    let min_len = self.chunk_len(intervals.len());
                    let (bu, br) = (&mut bar_u[level], &mut bar_rhs[level]);
                    let partials: Vec<Vec<T>> = self.pool.install(|| {
                        bu.par_chunks_mut(m)
                            .zip(br.par_chunks_mut(m))
                            .zip(intervals.par_iter())
                            .with_min_len(min_len)
                            .map(|((bu, br), interval)| {
                                let mut local = vec![T::zero(); design.len()];
                                for (k, rec) in interval.steps.iter().enumerate().rev() {
                                    let i = k + 1;
                                    let y = std::mem::replace(&mut bu[i], vec![T::zero(); dim]);
                                    if has_rhs {
                                        vector::add_assign(&mut br[i], &y);
                                    }
                                    let (a, r) = self.propagate_transpose(level, rec, design, y)?;
                                    vector::add_assign(&mut bu[i - 1], &a);
                                    vector::add_assign(&mut local, &r);
                                }
                                Ok(local)
                            })
                            .collect::<Result<_>>()
                    })?;
                    for p in &partials {
                        vector::add_assign(&mut design_bar, p);
                    }
                }
                TapePhase::CRelax { level, points } => {
                    let level = *level;
                    let has_rhs = level > 0;
                    let min_len = self.chunk_len(points.len());
                    let bu = &bar_u[level];
                    let results: Vec<(Vec<T>, Vec<T>)> = self.pool.install(|| {
                        points
                            .par_iter()
                            .with_min_len(min_len)
                            .map(|(c, rec)| self.propagate_transpose(level, rec, design, bu[*c].clone()))
                            .collect::<Result<_>>()
                    })?;
                    for ((c, _), (a, r)) in points.iter().zip(results) {
                        let y = std::mem::replace(&mut bar_u[level][*c], vec![T::zero(); dim]);
                        if has_rhs {
                            vector::add_assign(&mut bar_rhs[level][*c], &y);
                        }
                        vector::add_assign(&mut bar_u[level][c - 1], &a);
                        vector::add_assign(&mut design_bar, &r);
                    }
                }
                TapePhase::Restrict { level, points } => {
                    let level = *level;
                    let coarse = level + 1;
                    let has_rhs = level > 0;
                    let min_len = self.chunk_len(points.len());
                    let br_coarse = &bar_rhs[coarse];
                    let results: Vec<((Vec<T>, Vec<T>), (Vec<T>, Vec<T>))> = self.pool.install(|| {
                        points
                            .par_iter()
                            .with_min_len(min_len)
                            .map(|(j, rec_f, rec_c)| {
                                let y = &br_coarse[*j];
                                let fine = self.propagate_transpose(level, rec_f, design, y.clone())?;
                                let coarse_part = self.propagate_transpose(coarse, rec_c, design, y.clone())?;
                                Ok((fine, coarse_part))
                            })
                            .collect::<Result<_>>()
                    })?;
                    for ((j, _, _), ((a_f, r_f), (a_c, r_c))) in points.iter().zip(results) {
                        let j = *j;
                        let yg = std::mem::replace(&mut bar_rhs[coarse][j], vec![T::zero(); dim]);
                        let yu = std::mem::replace(&mut bar_u[coarse][j], vec![T::zero(); dim]);
                        let yv = std::mem::replace(&mut bar_injected[coarse][j], vec![T::zero(); dim]);
                        let target = &mut bar_u[level][m * j];
                        vector::add_assign(target, &yu);
                        vector::add_assign(target, &yv);
                        if has_rhs {
                            vector::add_assign(&mut bar_rhs[level][m * j], &yg);
                        }
                        vector::add_assign(&mut bar_u[level][m * j - 1], &a_f);
                        vector::sub_assign(&mut bar_u[level][m * (j - 1)], &a_c);
                        vector::add_assign(&mut design_bar, &r_f);
                        vector::sub_assign(&mut design_bar, &r_c);
                    }
                    // coarse point 0 is the fixed initial condition
                    for arr in [&mut bar_u[coarse], &mut bar_rhs[coarse], &mut bar_injected[coarse]] {
                        arr[0] = vec![T::zero(); dim];
                    }
                }
            }
        }
        self.counters.transpose_cycles.fetch_add(1, Ordering::Relaxed);
        let mut out = std::mem::take(&mut bar_u[0]);
        out[0] = vec![T::zero(); dim];
        Ok((SpaceTimeState::from_points(out), design_bar))
    }

    /// Re-executes a tape from `u` without the stepper's snapshots and checks
    /// that every step sees exactly its recorded input.
    pub fn replay(&self, tape: &CycleTape<T>, u: &SpaceTimeState<T>) -> Result<SpaceTimeState<T>> {
        self.check_shape(u)?;
        let design = tape.design.as_slice();
        let m = self.hierarchy.coarsening_factor();
        let mismatch = |what: &str, level: usize, j: usize| Error::TapeMismatch(format!("{what} input differs at level {level}, point {j}"));
        let mut levels: Vec<LevelData<T>> = (0..self.hierarchy.n_levels())
            .map(|_| LevelData { u: Vec::new(), rhs: None, injected: Vec::new() })
            .collect();
        levels[0].u = u.points().to_vec();
        levels[0].u[0] = self.stepper.initial_state();
        let apply = |level: usize, prev: &[T], rec: &StepRecord<T>, rhs: Option<&Vec<T>>| -> Result<Option<Vec<T>>> {
            if rec.inputs.first().map(|x| x.as_slice()) != Some(prev) {
                return Ok(None);
            }
            let (mut next, _) = self.propagate(level, prev, design, false)?;
            if let Some(g) = rhs {
                vector::add_assign(&mut next, g);
            }
            Ok(Some(next))
        };
        for phase in &tape.phases {
            match phase {
                TapePhase::FRelax { level, intervals } => {
                    let data = &mut levels[*level];
                    for interval in intervals {
                        for (k, rec) in interval.steps.iter().enumerate() {
                            let j = interval.start + k + 1;
                            let rhs = data.rhs.as_ref().map(|r| &r[j]);
                            data.u[j] = apply(*level, &data.u[j - 1], rec, rhs)?.ok_or_else(|| mismatch("F-relaxation", *level, j))?;
                        }
                    }
                }
                TapePhase::CRelax { level, points } => {
                    let data = &mut levels[*level];
                    for (c, rec) in points {
                        let rhs = data.rhs.as_ref().map(|r| &r[*c]);
                        data.u[*c] = apply(*level, &data.u[c - 1], rec, rhs)?.ok_or_else(|| mismatch("C-relaxation", *level, *c))?;
                    }
                }
                TapePhase::CoarseSolve { level, steps } => {
                    let data = &mut levels[*level];
                    for (k, rec) in steps.iter().enumerate() {
                        let j = k + 1;
                        let rhs = data.rhs.as_ref().map(|r| &r[j]);
                        data.u[j] = apply(*level, &data.u[j - 1], rec, rhs)?.ok_or_else(|| mismatch("coarse solve", *level, j))?;
                    }
                }
                TapePhase::Restrict { level, points } => {
                    let data = &levels[*level];
                    for (j, rec_f, rec_c) in points {
                        if rec_f.inputs[0] != data.u[m * j - 1] || rec_c.inputs[0] != data.u[m * (j - 1)] {
                            return Err(mismatch("restriction", *level, *j));
                        }
                    }
                    let (cu, cr) = self.restrict_impl(*level, &data.u, data.rhs.as_deref(), design, None)?;
                    levels[level + 1] = LevelData { injected: cu.clone(), u: cu, rhs: Some(cr) };
                }
                TapePhase::Correct { level } => {
                    let (head, tail) = levels.split_at_mut(level + 1);
                    self.correct(*level, &mut head[*level].u, &tail[0], None);
                }
            }
        }
        Ok(SpaceTimeState::from_points(std::mem::take(&mut levels[0].u)))
    }

    // ------------------------------------------------------------- residuals

    /// `|(step(u^{i-1}) - u^i)_{i=1..N}|_2` on the fine level.
    pub fn residual_norm(&self, u: &SpaceTimeState<T>, design: &[T]) -> Result<T> {
        self.check_shape(u)?;
        let pts = u.points();
        let min_len = self.chunk_len(pts.len());
        let parts: Vec<T> = self.pool.install(|| {
            (1..pts.len())
                .into_par_iter()
                .with_min_len(min_len)
                .map(|i| {
                    let (next, _) = self.propagate(0, &pts[i - 1], design, false)?;
                    let d = vector::sub(&next, &pts[i]);
                    Ok(vector::dot(&d, &d))
                })
                .collect::<Result<_>>()
        })?;
        Ok(vector::ordered_sum(&parts).sqrt())
    }

    /// Time-serial reference solution on the fine grid.
    pub fn serial_solve(&self, design: &[T]) -> Result<SpaceTimeState<T>> {
        let out = super::serial_solve(self.stepper, design, self.fine_dt(), self.n_steps())?;
        self.counters.primal[0].fetch_add(self.n_steps() as u64, Ordering::Relaxed);
        Ok(out)
    }

    /// Iterates `u <- H(u)` until `|u_{k+1} - u_k|_2` falls below
    /// `halting_tol` times its first value.
    pub fn solve(
        &self,
        initial: SpaceTimeState<T>,
        design: &[T],
    ) -> std::result::Result<(SpaceTimeState<T>, ConvergenceRecord), DriverError<(SpaceTimeState<T>, ConvergenceRecord)>> {
        let mut u = initial;
        let mut record = ConvergenceRecord::default();
        let mut first = None;
        for _ in 0..self.config.max_iters {
            let start = Instant::now();
            let next = self.cycle(&u, design)?;
            let delta = next.diff_norm(&u).as_f64();
            u = next;
            record.push(IterationRecord {
                iteration: 0,
                state_residual: delta,
                adjoint_residual: None,
                gradient_norm: None,
                objective: None,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
            let r0 = *first.get_or_insert(delta);
            if delta == 0.0 || delta <= self.config.halting_tol * r0 {
                return Ok((u, record));
            }
        }
        Err(DriverError::MaxItersExceeded { iterations: self.config.max_iters, partial: Box::new((u, record)) })
    }
}
