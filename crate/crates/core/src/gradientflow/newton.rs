use serde::{Deserialize, Serialize};

use super::problem::{Problem, State};
use crate::error::{Error, Result};
use crate::linalg::KrylovConfig;

/// Eisenstat–Walker forcing, choice 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Forcing {
    pub eta0: f64,
    pub eta_max: f64,
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for Forcing {
    fn default() -> Self {
        Self {
            eta0: 0.3,
            eta_max: 0.9,
            gamma: 0.9,
            alpha: 2.0,
        }
    }
}

impl Forcing {
    /// Next forcing term from the residual norms of the last two iterates.
    pub fn next(&self, eta_prev: f64, norm: f64, norm_prev: f64) -> f64 {
        let mut eta = self.gamma * (norm / norm_prev).powf(self.alpha);
        let guard = self.gamma * eta_prev.powf(self.alpha);
        if guard > 0.1 {
            eta = eta.max(guard);
        }
        eta.min(self.eta_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineSearch {
    None,
    /// Halve the step until the residual norm decreases or, with the
    /// conductance eliminated, the reduced functional satisfies Armijo.
    Backtracking,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub max_iters: usize,
    pub forcing: Forcing,
    pub line_search: LineSearch,
    /// Fraction-to-boundary damping: the update is shortened so no positive
    /// conductance loses more than this fraction of its value in one iteration.
    pub fraction_to_boundary: Option<f64>,
    /// For `gamma >= 1`, recompute the conductance after every update by
    /// solving its (cellwise) equation exactly at the new potential, instead
    /// of taking the linearized conductance step.
    pub eliminate_conductance: bool,
    pub krylov: KrylovConfig,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_iters: 10,
            forcing: Forcing::default(),
            line_search: LineSearch::Backtracking,
            fraction_to_boundary: Some(0.99),
            eliminate_conductance: true,
            krylov: KrylovConfig::default(),
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "newton max_iters must be >= 1".into(),
            ));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("newton abs_tol must be > 0".into()));
        }
        if let Some(tau) = self.fraction_to_boundary {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "fraction_to_boundary must lie in (0, 1), got {tau}"
                )));
            }
        }
        self.krylov.validate()
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub c: Vec<f64>,
    pub u: Vec<f64>,
    pub iterations: usize,
    pub krylov_iterations: usize,
    pub residual: f64,
}

/// Failure carrying the work done, so the stepper can still count it.
#[derive(Clone, Debug)]
pub struct NewtonFailure {
    pub error: Error,
    pub iterations: usize,
    pub krylov_iterations: usize,
}

/// Inexact Newton for one backward-Euler step from `c_prev`, starting at `guess`.
pub fn newton_solve(
    problem: &Problem,
    c_prev: &[f64],
    guess: &State,
    dt: f64,
    cfg: &NewtonConfig,
) -> std::result::Result<NewtonOutcome, NewtonFailure> {
    let eliminate = cfg.eliminate_conductance && problem.params.gamma >= 1.0;
    let mut u = guess.u.clone();
    let (mut c, mut merit) = if eliminate {
        problem.reduced_energy(c_prev, &u, dt)
    } else {
        (guess.c.clone(), f64::NAN)
    };
    let mut krylov_total = 0;
    let fail = |error, iterations, krylov_iterations| NewtonFailure {
        error,
        iterations,
        krylov_iterations,
    };
    let (mut rc, mut ru) = problem.residual(c_prev, &c, &u, dt);
    let mut norm = problem.residual_norm(&rc, &ru);
    let mut eta = cfg.forcing.eta0;
    let mut norm_prev = f64::NAN;
    for it in 0..=cfg.max_iters {
        if !norm.is_finite() {
            return Err(fail(
                Error::NewtonFailed {
                    iterations: it,
                    residual: norm,
                },
                it,
                krylov_total,
            ));
        }
        if norm <= cfg.abs_tol {
            return Ok(NewtonOutcome {
                c,
                u,
                iterations: it,
                krylov_iterations: krylov_total,
                residual: norm,
            });
        }
        if it == cfg.max_iters {
            break;
        }
        if it > 0 {
            eta = cfg.forcing.next(eta, norm, norm_prev);
        }
        let jac = problem
            .jacobian(&c, &u, dt)
            .map_err(|e| fail(e, it, krylov_total))?;
        let mut kcfg = cfg.krylov;
        kcfg.rtol = 0.0;
        kcfg.atol = (eta * norm).max(0.1 * cfg.abs_tol);
        let neg_c: Vec<f64> = rc.iter().map(|r| -r).collect();
        let neg_u: Vec<f64> = ru.iter().map(|r| -r).collect();
        let sol = match jac.solve(&neg_c, &neg_u, &kcfg, problem.constant_kernel()) {
            Ok(s) => s,
            Err(e) => {
                if let Error::KrylovDiverged { iterations, .. } = e {
                    krylov_total += iterations;
                }
                return Err(fail(e, it + 1, krylov_total));
            }
        };
        krylov_total += sol.krylov.iterations;
        // directional derivative of the reduced functional along du
        let slope = -crate::linalg::dot(&ru, &sol.du);
        let mut lambda = match cfg.fraction_to_boundary {
            Some(tau) if !eliminate => max_positive_step(&c, &sol.dc, tau),
            _ => 1.0,
        };
        let max_tries = if eliminate { 40 } else { 8 };
        let mut tries = 0;
        loop {
            let mut u_new = u.clone();
            problem.space.add_free(&mut u_new, &sol.du, lambda);
            let (c_new, merit_new) = if eliminate {
                problem.reduced_energy(c_prev, &u_new, dt)
            } else {
                (
                    c.iter().zip(&sol.dc).map(|(x, d)| x + lambda * d).collect(),
                    f64::NAN,
                )
            };
            let (rc_new, ru_new) = problem.residual(c_prev, &c_new, &u_new, dt);
            let norm_new = problem.residual_norm(&rc_new, &ru_new);
            let decrease = norm_new < (1.0 - 1e-4 * lambda) * norm;
            let accept = match cfg.line_search {
                LineSearch::None => true,
                LineSearch::Backtracking if eliminate => {
                    decrease || (slope < 0.0 && merit_new <= merit + 1e-4 * lambda * slope)
                }
                LineSearch::Backtracking => decrease,
            };
            if accept || tries >= max_tries {
                c = c_new;
                u = u_new;
                rc = rc_new;
                ru = ru_new;
                merit = merit_new;
                norm_prev = norm;
                norm = norm_new;
                break;
            }
            lambda *= 0.5;
            tries += 1;
        }
    }
    Err(fail(
        Error::NewtonFailed {
            iterations: cfg.max_iters,
            residual: norm,
        },
        cfg.max_iters,
        krylov_total,
    ))
}

/// Largest `lambda <= 1` with `c + lambda dc >= (1 - tau) c` on every positive cell.
pub fn max_positive_step(c: &[f64], dc: &[f64], tau: f64) -> f64 {
    c.iter()
        .zip(dc)
        .filter(|&(&c, &d)| c > 0.0 && d < 0.0)
        .map(|(&c, &d)| tau * c / -d)
        .fold(1.0, f64::min)
}
