//! Backward-Euler integration of the coupled conductance/potential system.
//!
//! Each step solves the nonlinear system with inexact Newton, the linear
//! systems through the Schur complement of the block Jacobian. Step sizes are
//! chosen by step doubling with a PI controller; Newton failures and negative
//! conductances halve the step.

mod network;
mod newton;
mod problem;
mod stepper;

pub use network::NetworkFormation;
pub use newton::{newton_solve, Forcing, LineSearch, NewtonConfig, NewtonFailure, NewtonOutcome};
pub use problem::{FluxFn, PotentialData, Problem, ScalarFn, State};
pub use stepper::{
    run_to_steady, Run, StepOutcome, StepReport, Stepper, StopReason, TimeConfig, TimeController,
};
