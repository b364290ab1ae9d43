//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::control::ControlMode;
use crate::error::{Error, Result};
use crate::experiments::{
    cs_monitor, run_cs_online, run_ri, run_tomo, CsMethod, CsOnlineConfig, RiConfig, TomoConfig,
};
use crate::io::{read_matrix_market, read_vector, write_matrix_market, write_pgm, write_vector};
use crate::operators::{BlockPartition, Image2D, ImageShape, RowSystem};
use crate::scenarios::{
    gen_gaussian_cs, gen_phantom, gen_ri_scenario_with_arms, TomoGeometry, RI_ARMS,
};
use crate::shrinkage::ShrinkMode;
use crate::solvers::{run as solve_run, SolveOptions, StopMonitor, Trace};
use crate::stepsize::StepKind;

/// Row-action solvers for sparse and TV-regularized linear systems.
#[derive(Debug, Parser)]
#[command(name = "rowaction", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve min λ‖x‖₁ + ½‖x‖² s.t. Ax = b for a MatrixMarket matrix.
    Solve(SolveArgs),
    /// Online compressed sensing: one Gaussian row arrives at a time.
    CsOnline(CsOnlineArgs),
    /// TV-regularized parallel-beam tomography of the built-in phantom.
    Tomo(TomoArgs),
    /// Online interferometric imaging with block-wise Fourier measurements.
    Ri(RiArgs),
    /// Write a generated system as MatrixMarket matrix plus vector files.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Coefficient matrix (MatrixMarket).
    #[arg(long)]
    pub matrix: PathBuf,
    /// Right-hand side, one value per line.
    #[arg(long)]
    pub rhs: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// exact, dynamic or constant.
    #[arg(long, default_value = "dynamic")]
    pub stepsize: StepKind,
    /// cyclic, uniform, rownorm or newest-first.
    #[arg(long, default_value = "cyclic")]
    pub control: ControlMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: u64,
    /// Relative residual at which to stop.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Rows per block; 1 gives sparse Kaczmarz, m gives linearized Bregman.
    #[arg(long, default_value_t = 1)]
    pub block_size: usize,
    /// Constrain x ≥ 0.
    #[arg(long)]
    pub nonneg: bool,
    #[arg(long, default_value_t = 1)]
    pub log_every: u64,
    /// Trace CSV output.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Solution output, one value per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Stop-monitor overrides; unset fields keep the subcommand's defaults.
#[derive(Debug, Clone, Args)]
pub struct MonitorArgs {
    /// An append is significant if it raises the residual by more than this factor.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Residuals below this never count as significant.
    #[arg(long)]
    pub eps_abs: Option<f64>,
    /// Consecutive insignificant appends before the monitor fires.
    #[arg(long)]
    pub patience: Option<usize>,
}

impl MonitorArgs {
    fn build(&self, base: StopMonitor) -> Result<StopMonitor> {
        StopMonitor::new(
            self.gamma.unwrap_or(base.gamma()),
            self.eps_abs.unwrap_or(base.eps_abs()),
            self.patience.unwrap_or(base.patience()),
        )
    }
}

#[derive(Debug, Args)]
pub struct CsOnlineArgs {
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub sparsity: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// kaczmarz or linbreg.
    #[arg(long, default_value = "kaczmarz")]
    pub method: CsMethod,
    /// Step size rule; linbreg only supports dynamic and constant.
    #[arg(long, default_value = "dynamic")]
    pub stepsize: StepKind,
    /// Work between arrivals: sweeps (kaczmarz) or steps (linbreg).
    #[arg(long, default_value_t = 50)]
    pub steps_per_row: u64,
    #[arg(long, default_value_t = 200)]
    pub max_rows: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub monitor: MonitorArgs,
    #[arg(long, default_value_t = 1)]
    pub log_every: u64,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TomoArgs {
    /// Image side length in pixels.
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 7)]
    pub angles: usize,
    /// Detector bins per angle.
    #[arg(long, default_value_t = 41)]
    pub bins: usize,
    /// Linearized Bregman steps per Kaczmarz sweep.
    #[arg(long, default_value_t = 100)]
    pub lb_steps: usize,
    #[arg(long, default_value_t = 200)]
    pub sweeps: usize,
    /// TV weight; the phantom's maximum intensity is 1.
    #[arg(long, default_value_t = 1.75)]
    pub lambda: f64,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Reconstruction output (PGM).
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Per-sweep ‖∇u − p‖ as CSV.
    #[arg(long)]
    pub split_trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RiArgs {
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 16)]
    pub blocks: usize,
    /// Sampling points in the base pattern.
    #[arg(long, default_value_t = 300)]
    pub samples: usize,
    /// Radial arms in the base pattern.
    #[arg(long, default_value_t = RI_ARMS)]
    pub arms: usize,
    #[arg(long, default_value_t = 300)]
    pub steps_per_block: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Defaults to 1e-4·‖x†‖₁.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub monitor: MonitorArgs,
    /// Log interval in steps; block ends are always logged.
    #[arg(long, default_value_t = 50)]
    pub log_every: u64,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Cs,
    Tomo,
    Ri,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_enum)]
    pub scenario: Scenario,
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub rhs: PathBuf,
    /// Ground truth output.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// cs: unknowns.
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    /// cs: nonzeros.
    #[arg(long, default_value_t = 10)]
    pub sparsity: usize,
    /// cs: measurements.
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    /// tomo, ri: image side length.
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 7)]
    pub angles: usize,
    #[arg(long, default_value_t = 41)]
    pub bins: usize,
    #[arg(long, default_value_t = 16)]
    pub blocks: usize,
    #[arg(long, default_value_t = 300)]
    pub samples: usize,
    #[arg(long, default_value_t = RI_ARMS)]
    pub arms: usize,
}

/// Final state reported on stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub subcommand: &'static str,
    pub steps: u64,
    pub residual: f64,
    pub error: Option<f64>,
    pub stop_step: Option<u64>,
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        write!(
            f,
            "summary,{},steps={},residual={:e},error={},stop_step={}",
            self.subcommand,
            self.steps,
            self.residual,
            opt(self.error.map(|e| format!("{e:e}"))),
            opt(self.stop_step.map(|s| s.to_string())),
        )
    }
}

impl Summary {
    fn from_trace(subcommand: &'static str, trace: &Trace, stop_step: Option<u64>) -> Self {
        let last = trace.last();
        Summary {
            subcommand,
            steps: last.map_or(0, |r| r.step),
            residual: last.map_or(f64::NAN, |r| r.residual),
            error: last.and_then(|r| r.error),
            stop_step,
        }
    }
}

fn write_trace(path: Option<&Path>, trace: &Trace) -> Result<()> {
    if let Some(p) = path {
        trace.write_csv(fs::File::create(p)?)?;
    }
    Ok(())
}

fn write_image(path: Option<&Path>, img: &Image2D) -> Result<()> {
    match path {
        Some(p) => write_pgm(p, img),
        None => Ok(()),
    }
}

/// Runs a parsed command line, printing the summary; returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::CsOnline(a) => cmd_cs_online(&a).map(|s| (s, 0)),
        Command::Tomo(a) => cmd_tomo(&a).map(|s| (s, 0)),
        Command::Ri(a) => cmd_ri(&a).map(|s| (s, 0)),
        Command::Export(a) => cmd_export(&a).map(|()| (None, 0)),
    };
    match outcome {
        Ok((summary, code)) => {
            if let Some(s) = summary {
                println!("{s}");
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

type Outcome = Result<(Option<Summary>, i32)>;

pub fn cmd_solve(a: &SolveArgs) -> Outcome {
    let rhs = read_vector(&a.rhs)?;
    let system = read_matrix_market(&a.matrix)?.into_system(&rhs)?;
    if a.block_size == 0 {
        return Err(Error::InvalidConfig("block size must be positive".into()));
    }
    let partition = BlockPartition::uniform(system.m(), a.block_size)?;
    let opts = SolveOptions {
        lambda: a.lambda,
        shrink_mode: if a.nonneg {
            ShrinkMode::Nonnegative
        } else {
            ShrinkMode::Signed
        },
        control: a.control,
        seed: a.seed,
        step: a.stepsize,
        max_steps: a.max_steps,
        tol: a.tol,
        log_every: a.log_every,
    };
    let out = solve_run(&system, &partition, &opts, None)?;
    write_trace(a.trace.as_deref(), &out.trace)?;
    if let Some(p) = &a.out {
        write_vector(p, &out.x)?;
    }
    let summary = Summary::from_trace("solve", &out.trace, None);
    Ok((Some(summary), if out.converged { 0 } else { 2 }))
}

pub fn cmd_cs_online(a: &CsOnlineArgs) -> Result<Option<Summary>> {
    let cfg = CsOnlineConfig {
        n: a.n,
        sparsity: a.sparsity,
        seed: a.seed,
        method: a.method,
        step: a.stepsize,
        steps_per_row: a.steps_per_row,
        max_rows: a.max_rows,
        lambda: a.lambda,
        monitor: a.monitor.build(cs_monitor())?,
        log_every: a.log_every,
    };
    let out = run_cs_online(&cfg)?.output;
    write_trace(a.trace.as_deref(), &out.trace)?;
    Ok(Some(Summary::from_trace(
        "cs-online",
        &out.trace,
        out.stop_step,
    )))
}

pub fn cmd_tomo(a: &TomoArgs) -> Result<Option<Summary>> {
    let cfg = TomoConfig {
        size: a.size,
        angles: a.angles,
        bins: a.bins,
        lb_steps: a.lb_steps,
        sweeps: a.sweeps,
        lambda: a.lambda,
    };
    let res = run_tomo(&cfg)?;
    let out = &res.output;
    write_trace(a.trace.as_deref(), &out.trace)?;
    write_image(a.image.as_deref(), &out.u)?;
    if let Some(p) = &a.split_trace {
        let mut f = fs::File::create(p)?;
        writeln!(f, "sweep,split_residual")?;
        for (i, r) in out.split_residuals.iter().enumerate() {
            writeln!(f, "{},{r:e}", i + 1)?;
        }
    }
    Ok(Some(Summary::from_trace("tomo", &out.trace, None)))
}

pub fn cmd_ri(a: &RiArgs) -> Result<Option<Summary>> {
    let cfg = RiConfig {
        size: a.size,
        blocks: a.blocks,
        samples: a.samples,
        arms: a.arms,
        steps_per_block: a.steps_per_block,
        seed: a.seed,
        log_every: a.log_every,
        lambda: a.lambda,
        monitor: a.monitor.build(StopMonitor::default())?,
    };
    let res = run_ri(&cfg)?;
    let out = &res.output;
    write_trace(a.trace.as_deref(), &out.trace)?;
    let img = Image2D::new(a.size, a.size, out.x.clone())?;
    write_image(a.image.as_deref(), &img)?;
    Ok(Some(Summary::from_trace("ri", &out.trace, out.stop_step)))
}

pub fn cmd_export(a: &ExportArgs) -> Result<()> {
    let (system, truth): (RowSystem, Vec<f64>) = match a.scenario {
        Scenario::Cs => {
            let (truth, stream) = gen_gaussian_cs(a.n, a.sparsity, a.seed)?;
            let (rows, rhs): (Vec<_>, Vec<_>) = stream.take(a.rows).unzip();
            (RowSystem::from_rows(a.n, &rows, &rhs)?, truth.into_inner())
        }
        Scenario::Tomo => {
            let phantom = gen_phantom(a.size, a.size);
            let geo = TomoGeometry::new(ImageShape::square(a.size), a.angles, a.bins)?;
            (geo.system_for(&phantom)?, phantom.data)
        }
        Scenario::Ri => {
            let sc = gen_ri_scenario_with_arms(
                ImageShape::square(a.size),
                a.blocks,
                a.samples,
                a.arms,
                a.seed,
            )?;
            let mut system = RowSystem::new(a.size * a.size);
            for b in &sc.blocks {
                system.append_rows(&b.rows, &b.rhs)?;
            }
            (system, sc.truth.data)
        }
    };
    write_matrix_market(&a.matrix, &system)?;
    write_vector(&a.rhs, system.rhs())?;
    if let Some(p) = &a.truth {
        write_vector(p, &truth)?;
    }
    Ok(())
}
