//! Row-action solvers for sparse and total-variation regularized linear
//! systems: sparse Kaczmarz, linearized Bregman and their block and online
//! variants.

pub mod cli;
pub mod control;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod scenarios;
pub mod shrinkage;
pub mod solvers;
pub mod stepsize;

pub use control::{ControlMode, ControlState};
pub use error::{Error, Result};
pub use operators::{BlockPartition, BlockView, Image2D, ImageShape, RowSystem, VectorField2D};
pub use shrinkage::{RegParam, ShrinkMode};
pub use solvers::{SolveOptions, SolverState, Trace, TraceRecord};
pub use stepsize::StepKind;
