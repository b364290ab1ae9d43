//! Iteration engines.
//!
//! All engines keep a dual iterate `z` and the primal `x = shrink(z)`
//! (starting from `z = x = 0`) and converge to the solution of
//!
//! ```text
//! min λ‖x‖₁ + ½‖x‖²   subject to   A x = b
//! ```
//!
//! for consistent systems and admissible control sequences.
//!
//! * [`sparse_kaczmarz_step`] works on one row `a_k`;
//! * [`block_step`] works on a block `A_l` and is the linearized Bregman
//!   iteration when the block is the whole matrix;
//! * [`run`] drives either over a fixed [`BlockPartition`];
//! * [`online_run`] interleaves steps with appended measurements and watches
//!   the residual's reaction through a [`StopMonitor`];
//! * [`tv_kaczmarz_run`] handles `min λ‖|∇u|‖₁ + ½(‖u‖² + ‖∇u‖²)` s.t.
//!   `A u = b` by splitting off `p = ∇u`.

use std::io::{self, Write};

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::control::{ControlMode, ControlState};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, rel_dist};
use crate::operators::{
    grad2d, grad2d_adjoint, row_project_in_place, BlockPartition, BlockView, Image2D, ImageShape,
    RowSystem, VectorField2D,
};
use crate::shrinkage::{group_shrink2_into, objective, ShrinkMode};
use crate::stepsize::{dynamic_step_from, exact_step_with, StepKind, StepsizeRule};

/// Dual/primal pair `(z, x)` with `x = shrink(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub k: u64,
    pub shrink_mode: ShrinkMode,
}

impl SolverState {
    pub fn new(n: usize, shrink_mode: ShrinkMode) -> Self {
        SolverState {
            z: vec![0.0; n],
            x: vec![0.0; n],
            k: 0,
            shrink_mode,
        }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Whether `x == shrink(z)` holds exactly.
    pub fn invariant_holds(&self, lambda: f64) -> bool {
        self.z
            .iter()
            .zip(&self.x)
            .all(|(&z, &x)| self.shrink_mode.scalar(z, lambda) == x)
    }

    fn update_primal(&mut self, lambda: f64) {
        self.shrink_mode.apply_into(&self.z, lambda, &mut self.x);
        debug_assert!(self.invariant_holds(lambda));
    }
}

/// One sparse Kaczmarz step on the row `aᵀx = beta`.
///
/// `StepKind::Exact` uses the exact stepsize; the other kinds coincide for a
/// single row and use `t = (aᵀx − beta)/‖a‖²`. In both cases
/// `z ← z − t a` and `x ← shrink(z)`.
pub fn sparse_kaczmarz_step(
    state: &mut SolverState,
    a: &[f64],
    beta: f64,
    lambda: f64,
    kind: StepKind,
) -> Result<()> {
    let a_sq = crate::linalg::norm_sq(a);
    sparse_kaczmarz_step_cached(state, a, a_sq, beta, lambda, kind)
}

fn sparse_kaczmarz_step_cached(
    state: &mut SolverState,
    a: &[f64],
    a_sq: f64,
    beta: f64,
    lambda: f64,
    kind: StepKind,
) -> Result<()> {
    if a_sq == 0.0 {
        return Err(Error::ZeroRow);
    }
    let t = match kind {
        StepKind::Exact => exact_step_with(&state.z, a, beta, lambda, state.shrink_mode)?,
        StepKind::Dynamic | StepKind::Constant => (dot(a, &state.x) - beta) / a_sq,
    };
    if t != 0.0 {
        axpy(-t, a, &mut state.z);
        state.update_primal(lambda);
    }
    state.k += 1;
    Ok(())
}

/// Stepsize used by [`block_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockStepsize {
    /// `‖r‖² / ‖A_lᵀ r‖²`
    Dynamic,
    /// A fixed `t`, typically `‖A_l‖⁻²`.
    Constant(f64),
}

/// One block step: `r = A_l x − b_l`, `z ← z − t A_lᵀ r`, `x ← shrink(z)`.
pub fn block_step(
    state: &mut SolverState,
    block: BlockView<'_>,
    lambda: f64,
    step: BlockStepsize,
) -> Result<()> {
    let r = block.residual(&state.x);
    if r.iter().any(|&v| v != 0.0) {
        let atr = block.apply_transpose(&r);
        let t = match step {
            BlockStepsize::Dynamic => dynamic_step_from(&r, &atr)?,
            BlockStepsize::Constant(t) => t,
        };
        axpy(-t, &atr, &mut state.z);
        state.update_primal(lambda);
    }
    state.k += 1;
    Ok(())
}

/// One record of a [`Trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: u64,
    pub rows: usize,
    /// `‖Ax − b‖/‖b‖`, or `‖Ax − b‖` when `b = 0`.
    pub residual: f64,
    /// `‖x − x†‖/‖x†‖` when a ground truth is known.
    pub error: Option<f64>,
    pub objective: f64,
    /// Smallest entry of the iterate. Not part of the CSV.
    pub min_x: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub max_steps_reached: bool,
}

impl Trace {
    pub const CSV_HEADER: &'static str = "step,rows,residual,error,objective";

    pub fn push(&mut self, record: TraceRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.step < record.step));
        self.records.push(record);
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// First record whose error is below `threshold`.
    pub fn first_error_below(&self, threshold: f64) -> Option<&TraceRecord> {
        self.records
            .iter()
            .find(|r| r.error.is_some_and(|e| e < threshold))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            let error = r.error.map(|e| format!("{e:e}")).unwrap_or_default();
            writeln!(
                w,
                "{},{},{:e},{},{:e}",
                r.step, r.rows, r.residual, error, r.objective
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Parameters shared by [`run`] and [`online_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub lambda: f64,
    pub shrink_mode: ShrinkMode,
    pub control: ControlMode,
    pub seed: u64,
    pub step: StepKind,
    pub max_steps: u64,
    /// Stop once the relative residual is at most this.
    pub tol: f64,
    /// Trace (and tolerance check) interval in steps.
    pub log_every: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            lambda: 1.0,
            shrink_mode: ShrinkMode::Signed,
            control: ControlMode::Cyclic,
            seed: 0,
            step: StepKind::Dynamic,
            max_steps: 10_000,
            tol: 1e-8,
            log_every: 1,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidLambda(self.lambda));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidConfig(
                "log interval must be at least 1".into(),
            ));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tolerance {} is negative",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub x: Vec<f64>,
    pub state: SolverState,
    pub trace: Trace,
    pub converged: bool,
}

/// Relative residual, falling back to the absolute residual when `b = 0`.
fn residual_measure(system: &RowSystem, x: &[f64]) -> f64 {
    system
        .residual_norm_rel(x)
        .unwrap_or_else(|_| system.residual_norm(x))
}

// Shared step dispatch over a partition.
struct Stepper {
    lambda: f64,
    rule: StepsizeRule,
    warned_zero_row: bool,
}

impl Stepper {
    fn new(opts: &SolveOptions) -> Self {
        Stepper {
            lambda: opts.lambda,
            rule: StepsizeRule::new(opts.step),
            warned_zero_row: false,
        }
    }

    fn step(
        &mut self,
        state: &mut SolverState,
        system: &RowSystem,
        partition: &BlockPartition,
        l: usize,
    ) -> Result<()> {
        let range = partition.range(l);
        if range.len() == 1 {
            let k = range.start;
            let a_sq = system.row_sq_norm(k);
            if a_sq == 0.0 {
                if !self.warned_zero_row {
                    warn!("skipping zero row {k}");
                    self.warned_zero_row = true;
                }
                state.k += 1;
                return Ok(());
            }
            return sparse_kaczmarz_step_cached(
                state,
                system.row(k),
                a_sq,
                system.rhs()[k],
                self.lambda,
                self.rule.kind(),
            );
        }
        let block = system.block(range.clone());
        let step = match self.rule.kind() {
            StepKind::Exact => return Err(Error::ExactStepOnBlock(range.len())),
            StepKind::Dynamic => BlockStepsize::Dynamic,
            StepKind::Constant => match self.rule.constant_for(l, block) {
                Ok(t) => BlockStepsize::Constant(t),
                Err(Error::ZeroBlock) => {
                    state.k += 1;
                    return Ok(());
                }
                Err(e) => return Err(e),
            },
        };
        block_step(state, block, self.lambda, step)
    }

    fn check_partition(&self, partition: &BlockPartition) -> Result<()> {
        if self.rule.kind() == StepKind::Exact {
            if let Some(l) = (0..partition.len()).find(|&l| partition.block_size(l) > 1) {
                return Err(Error::ExactStepOnBlock(partition.block_size(l)));
            }
        }
        Ok(())
    }
}

fn block_weights(system: &RowSystem, partition: &BlockPartition, from: usize) -> Vec<f64> {
    (from..partition.len())
        .map(|l| system.block(partition.range(l)).frobenius_sq())
        .collect()
}

fn check_truth(truth: Option<&[f64]>, n: usize) -> Result<()> {
    match truth {
        Some(t) if t.len() != n => Err(Error::DimensionMismatch {
            expected: n,
            found: t.len(),
        }),
        _ => Ok(()),
    }
}

fn record(
    system: &RowSystem,
    state: &SolverState,
    lambda: f64,
    truth: Option<&[f64]>,
) -> TraceRecord {
    TraceRecord {
        step: state.k,
        rows: system.m(),
        residual: residual_measure(system, &state.x),
        error: truth.map(|t| rel_dist(&state.x, t)),
        objective: objective(&state.x, lambda),
        min_x: min_entry(&state.x),
    }
}

fn min_entry(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Runs the block method over a fixed partition until the relative residual
/// drops to `opts.tol` or `opts.max_steps` steps were taken.
///
/// Singleton blocks take sparse Kaczmarz steps, larger blocks take
/// [`block_step`]s. Running out of steps is not an error; it is flagged in
/// [`Trace::max_steps_reached`].
pub fn run(
    system: &RowSystem,
    partition: &BlockPartition,
    opts: &SolveOptions,
    truth: Option<&[f64]>,
) -> Result<RunOutput> {
    opts.validate()?;
    if system.is_empty() {
        return Err(Error::EmptySystem);
    }
    partition.check(system)?;
    check_truth(truth, system.n())?;

    let mut stepper = Stepper::new(opts);
    stepper.check_partition(partition)?;
    let mut control = ControlState::with_weights(
        opts.control,
        opts.seed,
        &block_weights(system, partition, 0),
    );
    let mut state = SolverState::new(system.n(), opts.shrink_mode);
    let mut trace = Trace::default();

    let mut converged = residual_measure(system, &state.x) <= opts.tol;
    while !converged && state.k < opts.max_steps {
        let l = control.next_index()?;
        stepper.step(&mut state, system, partition, l)?;
        if state.k.is_multiple_of(opts.log_every) || state.k == opts.max_steps {
            let rec = record(system, &state, opts.lambda, truth);
            converged = rec.residual <= opts.tol;
            trace.push(rec);
        }
    }
    trace.max_steps_reached = !converged;
    Ok(RunOutput {
        x: state.x.clone(),
        state,
        trace,
        converged,
    })
}

/// Flags appended measurements that no longer raise the residual.
///
/// An append is insignificant when the post-append relative residual is at
/// most `max(eps_abs, gamma · pre)`. After `patience` consecutive
/// insignificant appends the monitor fires.
#[derive(Debug, Clone, PartialEq)]
pub struct StopMonitor {
    gamma: f64,
    eps_abs: f64,
    patience: usize,
    streak: usize,
    fired_at: Option<u64>,
}

impl Default for StopMonitor {
    fn default() -> Self {
        StopMonitor::new(2.0, 1e-3, 2).unwrap()
    }
}

impl StopMonitor {
    pub fn new(gamma: f64, eps_abs: f64, patience: usize) -> Result<Self> {
        if gamma.is_nan() || gamma <= 1.0 || eps_abs.is_nan() || eps_abs <= 0.0 || patience == 0 {
            return Err(Error::InvalidConfig(format!(
                "stop monitor needs gamma > 1, eps_abs > 0, patience >= 1 \
                 (got {gamma}, {eps_abs}, {patience})"
            )));
        }
        Ok(StopMonitor {
            gamma,
            eps_abs,
            patience,
            streak: 0,
            fired_at: None,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eps_abs(&self) -> f64 {
        self.eps_abs
    }

    pub fn patience(&self) -> usize {
        self.patience
    }

    pub fn is_significant(&self, pre: f64, post: f64) -> bool {
        post > self.eps_abs.max(self.gamma * pre)
    }

    /// Records one append at `step`; returns whether it was significant.
    pub fn observe(&mut self, step: u64, pre: f64, post: f64) -> bool {
        let significant = self.is_significant(pre, post);
        if significant {
            self.streak = 0;
        } else {
            self.streak += 1;
            if self.streak >= self.patience && self.fired_at.is_none() {
                self.fired_at = Some(step);
            }
        }
        significant
    }

    pub fn fired_at(&self) -> Option<u64> {
        self.fired_at
    }
}

/// A batch of measurement rows arriving together.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBlock {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl MeasurementBlock {
    pub fn new(rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Self {
        MeasurementBlock { rows, rhs }
    }

    pub fn single(row: Vec<f64>, b: f64) -> Self {
        MeasurementBlock {
            rows: vec![row],
            rhs: vec![b],
        }
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }
}

/// How appended rows are grouped into the units the control sequence picks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    /// Every row is its own unit: increasing-cycle sparse Kaczmarz.
    Rows,
    /// Every arrival is one block.
    Blocks,
    /// All rows form one block: increasing linearized Bregman.
    Whole,
}

/// Work done between consecutive arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Steps(u64),
    /// Full passes over the current units: `n · (number of units)` steps.
    /// One sweep of single-row steps costs as much as one whole-matrix step.
    Sweeps(u64),
}

impl Schedule {
    fn count(self) -> u64 {
        match self {
            Schedule::Steps(n) | Schedule::Sweeps(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOptions {
    pub solve: SolveOptions,
    pub granularity: Granularity,
    /// With [`Schedule::Sweeps`], `solve.log_every` counts sweeps.
    pub schedule: Schedule,
    /// Extra steps after the stream ends, cut short once `solve.tol` is met.
    pub tail_steps: u64,
    pub monitor: StopMonitor,
    /// Stop pulling measurements once the monitor fires.
    pub stop_measuring_on_fire: bool,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        OnlineOptions {
            solve: SolveOptions::default(),
            granularity: Granularity::Rows,
            schedule: Schedule::Steps(50),
            tail_steps: 0,
            monitor: StopMonitor::default(),
            stop_measuring_on_fire: false,
        }
    }
}

/// What happened at one append.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub step: u64,
    pub rows_before: usize,
    pub rows_after: usize,
    pub pre_residual: f64,
    pub post_residual: f64,
    pub significant: bool,
}

#[derive(Debug, Clone)]
pub struct OnlineOutput {
    pub x: Vec<f64>,
    pub state: SolverState,
    pub trace: Trace,
    /// Step at which the monitor fired, if it did.
    pub stop_step: Option<u64>,
    /// Number of rows in the system when the monitor fired.
    pub stop_rows: Option<usize>,
    pub arrivals: Vec<Arrival>,
    pub system: RowSystem,
}

/// Online reconstruction: alternates the scheduled solver steps with
/// appending the next block from `stream`, then runs up to `tail_steps` more
/// steps on everything received.
///
/// The stream is pulled lazily, one block per arrival, so it may be fed from
/// another thread (e.g. a `std::sync::mpsc::Receiver`); blocks become visible
/// to the solver only between steps. An empty initial system is seeded with
/// the first block before iterating.
pub fn online_run<I>(
    initial: RowSystem,
    stream: I,
    opts: &OnlineOptions,
    truth: Option<&[f64]>,
) -> Result<OnlineOutput>
where
    I: IntoIterator<Item = MeasurementBlock>,
{
    let so = &opts.solve;
    so.validate()?;
    if opts.schedule.count() == 0 {
        return Err(Error::InvalidConfig(
            "schedule needs at least one step per arrival".into(),
        ));
    }
    check_truth(truth, initial.n())?;

    let mut stream = stream.into_iter();
    let mut system = initial;
    if system.is_empty() {
        match stream.next() {
            Some(block) => system.append_rows(&block.rows, &block.rhs)?,
            None => return Err(Error::EmptySystem),
        }
        if system.is_empty() {
            return Err(Error::EmptySystem);
        }
    }

    let mut partition = match opts.granularity {
        Granularity::Rows => BlockPartition::singletons(system.m()),
        Granularity::Blocks | Granularity::Whole => BlockPartition::whole(system.m()),
    };
    let mut stepper = Stepper::new(so);
    stepper.check_partition(&partition)?;
    let mut control =
        ControlState::with_weights(so.control, so.seed, &block_weights(&system, &partition, 0));
    let mut state = SolverState::new(system.n(), so.shrink_mode);
    let mut monitor = opts.monitor.clone();
    let mut trace = Trace::default();
    let mut arrivals = Vec::new();
    let mut stop_rows = None;

    let log = |state: &SolverState, system: &RowSystem, trace: &mut Trace| -> f64 {
        let rec = record(system, state, so.lambda, truth);
        let res = rec.residual;
        if trace.last().is_none_or(|r| r.step < rec.step) {
            trace.push(rec);
        }
        res
    };

    loop {
        let (budget, log_every) = match opts.schedule {
            Schedule::Steps(n) => (n, so.log_every),
            Schedule::Sweeps(n) => {
                let units = partition.len() as u64;
                (n * units, so.log_every * units)
            }
        };
        for s in 1..=budget {
            let l = control.next_index()?;
            stepper.step(&mut state, &system, &partition, l)?;
            let due = match opts.schedule {
                Schedule::Steps(_) => state.k.is_multiple_of(log_every),
                Schedule::Sweeps(_) => s % log_every == 0,
            };
            if due || s == budget {
                log(&state, &system, &mut trace);
            }
        }
        if opts.stop_measuring_on_fire && monitor.fired_at().is_some() {
            break;
        }
        let Some(block) = stream.next() else { break };
        if block.is_empty() {
            continue;
        }
        let pre = residual_measure(&system, &state.x);
        let rows_before = system.m();
        system.append_rows(&block.rows, &block.rhs)?;
        let first_new = partition.len();
        match opts.granularity {
            Granularity::Rows => {
                for _ in 0..block.len() {
                    partition.push_block(1)?;
                }
            }
            Granularity::Blocks => partition.push_block(block.len())?,
            Granularity::Whole => {
                partition.grow_last(block.len());
                stepper.rule.invalidate(0);
            }
        }
        if opts.granularity != Granularity::Whole {
            control.extend(&block_weights(&system, &partition, first_new));
        }
        stepper.check_partition(&partition)?;
        let post = residual_measure(&system, &state.x);
        let was_fired = monitor.fired_at().is_some();
        let significant = monitor.observe(state.k, pre, post);
        if !was_fired && monitor.fired_at().is_some() {
            stop_rows = Some(system.m());
        }
        arrivals.push(Arrival {
            step: state.k,
            rows_before,
            rows_after: system.m(),
            pre_residual: pre,
            post_residual: post,
            significant,
        });
    }

    let mut residual = trace.last().map_or(f64::INFINITY, |r| r.residual);
    let mut tail = 0;
    while tail < opts.tail_steps && residual > so.tol {
        let l = control.next_index()?;
        stepper.step(&mut state, &system, &partition, l)?;
        tail += 1;
        if state.k.is_multiple_of(so.log_every) || tail == opts.tail_steps {
            residual = log(&state, &system, &mut trace);
        }
    }

    Ok(OnlineOutput {
        x: state.x.clone(),
        state,
        trace,
        stop_step: monitor.fired_at(),
        stop_rows,
        arrivals,
        system,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvOptions {
    pub lambda: f64,
    pub sweeps: usize,
    pub lb_steps_per_sweep: usize,
}

#[derive(Debug, Clone)]
pub struct TvOutput {
    pub u: Image2D,
    pub p: VectorField2D,
    /// One record per sweep; `objective` is `λ‖|p|‖₁ + ½(‖u‖² + ‖p‖²)`.
    pub trace: Trace,
    /// `‖∇u − p‖` after every sweep.
    pub split_residuals: Vec<f64>,
}

/// Dual and primal variables of the split TV problem. `u == v` always.
#[derive(Debug, Clone, PartialEq)]
pub struct TvState {
    pub v: Image2D,
    pub q: VectorField2D,
    pub u: Image2D,
    pub p: VectorField2D,
}

impl TvState {
    pub fn new(shape: ImageShape) -> Self {
        TvState {
            v: Image2D::zeros(shape),
            q: VectorField2D::zeros(shape),
            u: Image2D::zeros(shape),
            p: VectorField2D::zeros(shape),
        }
    }

    /// One linearized Bregman step on the constraint `∇u − p = 0` with the
    /// dynamic stepsize. Returns the stepsize used (zero when feasible).
    pub fn gradient_step(&mut self, lambda: f64) -> Result<f64> {
        let mut w = grad2d(&self.u);
        for (a, b) in w.dx.iter_mut().zip(&self.p.dx) {
            *a -= b;
        }
        for (a, b) in w.dy.iter_mut().zip(&self.p.dy) {
            *a -= b;
        }
        let w_sq = w.norm_sq();
        if w_sq == 0.0 {
            return Ok(0.0);
        }
        let gt_w = grad2d_adjoint(&w);
        // ‖Bᵀw‖² = ‖∇ᵀw‖² + ‖w‖² ≥ ‖w‖² > 0
        let bt_sq = crate::linalg::norm_sq(&gt_w.data) + w_sq;
        if bt_sq == 0.0 {
            return Err(Error::InconsistentBlock);
        }
        let t = w_sq / bt_sq;
        axpy(-t, &gt_w.data, &mut self.v.data);
        axpy(t, &w.dx, &mut self.q.dx);
        axpy(t, &w.dy, &mut self.q.dy);
        self.u.data.copy_from_slice(&self.v.data);
        group_shrink2_into(&self.q, lambda, &mut self.p);
        Ok(t)
    }

    /// `λ‖|p|‖₁ + ½(‖u‖² + ‖p‖²)`
    pub fn objective(&self, lambda: f64) -> f64 {
        lambda * self.p.l21_norm() + 0.5 * (crate::linalg::norm_sq(&self.u.data) + self.p.norm_sq())
    }

    pub fn split_residual(&self) -> f64 {
        let g = grad2d(&self.u);
        let dx: f64 =
            g.dx.iter()
                .zip(&self.p.dx)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
        let dy: f64 =
            g.dy.iter()
                .zip(&self.p.dy)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
        (dx + dy).sqrt()
    }
}

/// TV-Kaczmarz: each sweep runs classical Kaczmarz over every row of `A`
/// (acting on `v`, hence `u`) followed by `lb_steps_per_sweep` linearized
/// Bregman steps on `∇u = p`.
pub fn tv_kaczmarz_run(
    system: &RowSystem,
    shape: ImageShape,
    opts: &TvOptions,
    truth: Option<&Image2D>,
) -> Result<TvOutput> {
    if system.n() != shape.pixels() {
        return Err(Error::DimensionMismatch {
            expected: shape.pixels(),
            found: system.n(),
        });
    }
    if !(opts.lambda.is_finite() && opts.lambda >= 0.0) {
        return Err(Error::InvalidLambda(opts.lambda));
    }
    if let Some(t) = truth {
        if t.shape() != shape {
            return Err(Error::DimensionMismatch {
                expected: shape.pixels(),
                found: t.data.len(),
            });
        }
    }
    let zero_rows = (0..system.m())
        .filter(|&k| system.row_sq_norm(k) == 0.0)
        .count();
    if zero_rows > 0 {
        warn!("skipping {zero_rows} zero rows");
    }

    let mut st = TvState::new(shape);
    let mut trace = Trace::default();
    let mut split_residuals = Vec::with_capacity(opts.sweeps);
    for sweep in 1..=opts.sweeps {
        for k in 0..system.m() {
            if system.row_sq_norm(k) > 0.0 {
                row_project_in_place(&mut st.v.data, system.row(k), system.rhs()[k])?;
            }
        }
        st.u.data.copy_from_slice(&st.v.data);
        for _ in 0..opts.lb_steps_per_sweep {
            st.gradient_step(opts.lambda)?;
        }
        split_residuals.push(st.split_residual());
        trace.push(TraceRecord {
            step: sweep as u64,
            rows: system.m(),
            residual: residual_measure(system, &st.u.data),
            error: truth.map(|t| rel_dist(&st.u.data, &t.data)),
            objective: st.objective(opts.lambda),
            min_x: min_entry(&st.u.data),
        });
    }
    Ok(TvOutput {
        u: st.u,
        p: st.p,
        trace,
        split_residuals,
    })
}

/// Optimality certificate for `min λ‖x‖₁ + ½‖x‖²` s.t. `Ax = b`.
///
/// Fits a multiplier `y` by least squares to `(Aᵀy)_i = x_i + λ sign(x_i)` on
/// the support (`|x_i| > 1e-12`), then returns the largest of: the misfit on
/// the support, the excess `|(Aᵀy)_i| − λ` off the support, and `‖Ax − b‖`.
/// Zero certifies optimality.
pub fn kkt_residual(system: &RowSystem, x: &[f64], lambda: f64) -> f64 {
    const SUPPORT_TOL: f64 = 1e-12;
    let m = system.m();
    let feasibility = system.residual_norm(x);
    if m == 0 {
        return feasibility;
    }
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() > SUPPORT_TOL).collect();

    let y = if support.is_empty() {
        DVector::zeros(m)
    } else {
        let ats = DMatrix::from_fn(support.len(), m, |r, c| system.row(c)[support[r]]);
        let target = DVector::from_iterator(
            support.len(),
            support.iter().map(|&i| x[i] + lambda * x[i].signum()),
        );
        let svd = ats.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
        match svd.solve(&target, eps) {
            Ok(y) => y,
            Err(_) => return f64::INFINITY,
        }
    };
    let aty = system.full().apply_transpose(y.as_slice());

    let mut worst = feasibility;
    for (i, &xi) in x.iter().enumerate() {
        let v = if xi.abs() > SUPPORT_TOL {
            (aty[i] - xi - lambda * xi.signum()).abs()
        } else {
            (aty[i].abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}
