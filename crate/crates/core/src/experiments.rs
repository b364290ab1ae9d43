//! The three demonstration workflows: online compressed sensing, TV
//! tomography and online interferometric imaging.

use std::fmt;
use std::str::FromStr;

use crate::control::ControlMode;
use crate::error::{Error, Result};
use crate::linalg::norm1;
use crate::operators::{Image2D, ImageShape, RowSystem};
use crate::scenarios::{
    gen_gaussian_cs, gen_phantom, gen_ri_scenario_with_arms, GroundTruth, RiScenario, TomoGeometry,
    RI_ARMS,
};
use crate::shrinkage::ShrinkMode;
use crate::solvers::{
    online_run, tv_kaczmarz_run, Granularity, OnlineOptions, OnlineOutput, Schedule, SolveOptions,
    StopMonitor, TvOptions, TvOutput,
};
use crate::stepsize::StepKind;

/// The two ways of solving while rows keep arriving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsMethod {
    /// Sparse Kaczmarz sweeps over a growing cycle of rows.
    #[default]
    Kaczmarz,
    /// Linearized Bregman steps on the whole growing matrix.
    LinBreg,
}

impl FromStr for CsMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kaczmarz" => Ok(CsMethod::Kaczmarz),
            "linbreg" => Ok(CsMethod::LinBreg),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for CsMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CsMethod::Kaczmarz => "kaczmarz",
            CsMethod::LinBreg => "linbreg",
        })
    }
}

/// Stop monitor tuned for single-row arrivals. One new Gaussian row moves the
/// relative residual of an `l`-row system by roughly a factor
/// `sqrt(1 + 1/l)`, so a milder jump factor with more patience is needed
/// than for block arrivals.
pub fn cs_monitor() -> StopMonitor {
    StopMonitor::new(1.5, 1e-3, 5).expect("valid monitor parameters")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsOnlineConfig {
    pub n: usize,
    pub sparsity: usize,
    pub seed: u64,
    pub method: CsMethod,
    /// Only the row-wise method can take exact steps.
    pub step: StepKind,
    /// Work between row arrivals: whole-matrix steps for linearized
    /// Bregman, sweeps over the rows received so far for Kaczmarz.
    pub steps_per_row: u64,
    pub max_rows: usize,
    pub lambda: f64,
    pub monitor: StopMonitor,
    pub log_every: u64,
}

impl Default for CsOnlineConfig {
    fn default() -> Self {
        CsOnlineConfig {
            n: 300,
            sparsity: 10,
            seed: 1,
            method: CsMethod::Kaczmarz,
            step: StepKind::Dynamic,
            steps_per_row: 50,
            max_rows: 200,
            lambda: 1.0,
            monitor: cs_monitor(),
            log_every: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsOnlineResult {
    pub truth: GroundTruth,
    pub output: OnlineOutput,
}

/// Starts from a single Gaussian row and appends one more every
/// `steps_per_row` steps until `max_rows` rows have arrived.
pub fn run_cs_online(cfg: &CsOnlineConfig) -> Result<CsOnlineResult> {
    if cfg.max_rows == 0 {
        return Err(Error::InvalidConfig("max_rows must be positive".into()));
    }
    let (truth, stream) = gen_gaussian_cs(cfg.n, cfg.sparsity, cfg.seed)?;
    let (granularity, schedule) = match cfg.method {
        CsMethod::Kaczmarz => (Granularity::Rows, Schedule::Sweeps(cfg.steps_per_row)),
        CsMethod::LinBreg => (Granularity::Whole, Schedule::Steps(cfg.steps_per_row)),
    };
    let opts = OnlineOptions {
        solve: SolveOptions {
            lambda: cfg.lambda,
            control: ControlMode::Cyclic,
            seed: cfg.seed,
            step: cfg.step,
            log_every: cfg.log_every,
            ..SolveOptions::default()
        },
        granularity,
        schedule,
        tail_steps: 0,
        monitor: cfg.monitor.clone(),
        stop_measuring_on_fire: false,
    };
    let output = online_run(
        RowSystem::new(cfg.n),
        stream.blocks().take(cfg.max_rows),
        &opts,
        Some(truth.as_slice()),
    )?;
    Ok(CsOnlineResult { truth, output })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomoConfig {
    pub size: usize,
    pub angles: usize,
    pub bins: usize,
    pub lb_steps: usize,
    pub sweeps: usize,
    pub lambda: f64,
}

impl Default for TomoConfig {
    fn default() -> Self {
        TomoConfig {
            size: 32,
            angles: 7,
            bins: 41,
            lb_steps: 100,
            sweeps: 200,
            lambda: 1.75,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TomoResult {
    pub phantom: Image2D,
    pub system: RowSystem,
    pub output: TvOutput,
}

pub fn run_tomo(cfg: &TomoConfig) -> Result<TomoResult> {
    let shape = ImageShape::square(cfg.size);
    let phantom = gen_phantom(cfg.size, cfg.size);
    let system = TomoGeometry::new(shape, cfg.angles, cfg.bins)?.system_for(&phantom)?;
    let opts = TvOptions {
        lambda: cfg.lambda,
        sweeps: cfg.sweeps,
        lb_steps_per_sweep: cfg.lb_steps,
    };
    let output = tv_kaczmarz_run(&system, shape, &opts, Some(&phantom))?;
    Ok(TomoResult {
        phantom,
        system,
        output,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiConfig {
    pub size: usize,
    pub blocks: usize,
    pub samples: usize,
    pub arms: usize,
    pub steps_per_block: u64,
    pub seed: u64,
    pub log_every: u64,
    /// Defaults to `1e-4·‖x†‖₁`.
    pub lambda: Option<f64>,
    pub monitor: StopMonitor,
}

impl Default for RiConfig {
    fn default() -> Self {
        RiConfig {
            size: 32,
            blocks: 16,
            samples: 300,
            arms: RI_ARMS,
            steps_per_block: 300,
            seed: 1,
            log_every: 50,
            lambda: None,
            monitor: StopMonitor::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiResult {
    pub scenario: RiScenario,
    pub lambda: f64,
    pub output: OnlineOutput,
}

/// Block-online reconstruction with nonnegative shrinkage and newest-first
/// control; one measurement block arrives every `steps_per_block` steps.
pub fn run_ri(cfg: &RiConfig) -> Result<RiResult> {
    let shape = ImageShape::square(cfg.size);
    let scenario = gen_ri_scenario_with_arms(shape, cfg.blocks, cfg.samples, cfg.arms, cfg.seed)?;
    let lambda = cfg.lambda.unwrap_or(1e-4 * norm1(&scenario.truth.data));
    let opts = OnlineOptions {
        solve: SolveOptions {
            lambda,
            shrink_mode: ShrinkMode::Nonnegative,
            control: ControlMode::NewestFirstCyclic,
            seed: cfg.seed,
            step: StepKind::Dynamic,
            log_every: cfg.log_every,
            ..SolveOptions::default()
        },
        granularity: Granularity::Blocks,
        schedule: Schedule::Steps(cfg.steps_per_block),
        tail_steps: 0,
        monitor: cfg.monitor.clone(),
        stop_measuring_on_fire: false,
    };
    let output = online_run(
        RowSystem::new(shape.pixels()),
        scenario.blocks.iter().cloned(),
        &opts,
        Some(&scenario.truth.data),
    )?;
    Ok(RiResult {
        scenario,
        lambda,
        output,
    })
}
