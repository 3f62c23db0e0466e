//! Manufactured p-Laplacian test cases, error norms and convergence studies.

mod cases;
mod norms;
mod study;

pub use cases::{lshape_angle, CaseName, Domain, GradFn, RadialCenter, TestCase};
pub use norms::{error_lp, error_quasinorm, error_w1p, fit_rate};
pub use study::{
    convergence_study, evaluate_level, solve_level, ConvergenceTable, ErrorReport, SolverSettings,
};
