use std::io::Write;

use serde::{Deserialize, Serialize};

use super::newton::{newton_solve, NewtonConfig, NewtonFailure, NewtonOutcome};
use super::problem::{Problem, State};
use crate::error::{Error, Result};

/// Step-size control by step doubling with a PI filter on the error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_max: f64,
    /// Absolute and relative tolerances of the weighted RMS error on `c`.
    pub atol: f64,
    pub rtol: f64,
    pub safety: f64,
    pub growth_max: f64,
    pub shrink_min: f64,
    /// Integral and proportional exponents of the PI controller.
    pub k_i: f64,
    pub k_p: f64,
    /// Factor applied to `dt` after a Newton failure or a negative conductance.
    pub failure_shrink: f64,
    /// Stop when `||c_{n+1} - c_n||_2 / dt <= steady_tol_rel * ||c_0||_2`.
    pub steady_tol_rel: f64,
    /// Hard cap on attempted steps.
    pub max_attempts: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt0: 1e-3,
            dt_min: 1e-12,
            dt_max: 1e4,
            t_max: 1e6,
            atol: 1e-3,
            rtol: 1e-2,
            safety: 0.9,
            growth_max: 2.0,
            shrink_min: 0.2,
            k_i: 0.3,
            k_p: 0.4,
            failure_shrink: 0.5,
            steady_tol_rel: 1e-8,
            max_attempts: 20_000,
        }
    }
}

impl TimeConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt0
            && self.dt0 <= self.dt_max
            && self.t_max > 0.0
            && self.atol >= 0.0
            && self.rtol >= 0.0
            && self.atol + self.rtol > 0.0
            && self.safety > 0.0
            && self.growth_max >= 1.0
            && self.shrink_min > 0.0
            && self.shrink_min < 1.0
            && self.failure_shrink > 0.0
            && self.failure_shrink < 1.0
            && self.steady_tol_rel >= 0.0
            && self.max_attempts > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "inconsistent time configuration {self:?}"
            )))
        }
    }
}

/// Current step size and the error memory of the PI filter.
#[derive(Clone, Debug)]
pub struct TimeController {
    pub cfg: TimeConfig,
    pub dt: f64,
    err_prev: Option<f64>,
}

impl TimeController {
    pub fn new(cfg: TimeConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            dt: cfg.dt0,
            cfg,
            err_prev: None,
        })
    }

    fn clamp(&self, dt: f64) -> f64 {
        dt.min(self.cfg.dt_max)
    }

    /// Next step after an accepted step with error estimate `err <= 1`.
    pub fn accept(&mut self, dt_used: f64, err: f64) {
        let c = &self.cfg;
        let e = err.max(1e-10);
        let mut factor = c.safety * (1.0 / e).powf(c.k_i);
        if let Some(ep) = self.err_prev {
            factor *= (ep / e).powf(c.k_p);
        }
        let factor = factor.clamp(c.shrink_min, c.growth_max);
        self.dt = self.clamp(dt_used * factor);
        self.err_prev = Some(e);
    }

    /// Shrink after an error estimate above one.
    pub fn reject(&mut self, dt_used: f64, err: f64) {
        let c = &self.cfg;
        let factor = (c.safety * err.powf(-0.5)).clamp(c.shrink_min, 1.0);
        self.dt = dt_used * factor;
    }

    /// Shrink after a Newton failure or a negative conductance.
    pub fn fail(&mut self, dt_used: f64) {
        self.dt = dt_used * self.cfg.failure_shrink;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepOutcome {
    Accepted,
    ErrorTooLarge,
    NewtonFailed,
    NegativeConductance,
}

/// One attempted step. Energies refer to the state after the attempt, i.e.
/// the unchanged state when the step was rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub outcome: StepOutcome,
    pub newton_iters: usize,
    pub krylov_iters: usize,
    pub error_estimate: f64,
    pub energy: f64,
    pub lyapunov: f64,
    pub plap_energy: f64,
    pub steady_residual: f64,
    pub min_c: f64,
}

impl StepReport {
    pub fn accepted(&self) -> bool {
        self.outcome == StepOutcome::Accepted
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Steady,
    TimeLimit,
}

#[derive(Clone, Debug)]
pub struct Run {
    pub reports: Vec<StepReport>,
    pub state: State,
    pub stop: StopReason,
}

impl Run {
    pub fn accepted_steps(&self) -> usize {
        self.reports.iter().filter(|r| r.accepted()).count()
    }

    pub fn newton_total(&self) -> usize {
        self.reports.iter().map(|r| r.newton_iters).sum()
    }

    pub fn krylov_total(&self) -> usize {
        self.reports.iter().map(|r| r.krylov_iters).sum()
    }

    /// Average Krylov iterations per Newton iteration.
    pub fn krylov_per_newton(&self) -> f64 {
        let n = self.newton_total();
        if n == 0 {
            0.0
        } else {
            self.krylov_total() as f64 / n as f64
        }
    }

    /// Per-step log: `step,t,dt,accepted,newton_iters,krylov_iters,E,E_plap,steady_residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "step",
            "t",
            "dt",
            "accepted",
            "newton_iters",
            "krylov_iters",
            "E",
            "E_plap",
            "steady_residual",
        ])?;
        for r in &self.reports {
            w.write_record(&[
                r.step.to_string(),
                format!("{:e}", r.t),
                format!("{:e}", r.dt),
                u8::from(r.accepted()).to_string(),
                r.newton_iters.to_string(),
                r.krylov_iters.to_string(),
                format!("{:e}", r.energy),
                format!("{:e}", r.plap_energy),
                format!("{:e}", r.steady_residual),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

enum Attempt {
    Ok(NewtonOutcome, f64, usize, usize),
    Failed(StepOutcome, usize, usize),
}

/// Integrates the flow of `problem` in time.
pub struct Stepper<'p> {
    pub problem: &'p Problem,
    pub newton: NewtonConfig,
    pub controller: TimeController,
}

impl<'p> Stepper<'p> {
    pub fn new(problem: &'p Problem, newton: NewtonConfig, time: TimeConfig) -> Result<Self> {
        newton.validate()?;
        Ok(Self {
            problem,
            newton,
            controller: TimeController::new(time)?,
        })
    }

    fn report(
        &self,
        step: usize,
        state: &State,
        dt: f64,
        outcome: StepOutcome,
        work: (usize, usize),
        err: f64,
    ) -> StepReport {
        let pb = self.problem;
        let (plap_energy, steady_residual) = match pb.params.p() {
            Some(p) => (pb.plap_energy(&state.u, p), pb.steady_residual(state)),
            None => (f64::NAN, f64::NAN),
        };
        StepReport {
            step,
            t: state.t,
            dt,
            outcome,
            newton_iters: work.0,
            krylov_iters: work.1,
            error_estimate: err,
            energy: pb.energy(state),
            lyapunov: pb.lyapunov_energy(state),
            plap_energy,
            steady_residual,
            min_c: state.c.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    /// Area-weighted RMS of `c2 - c1` scaled by `atol + rtol max(|c1|, |c2|)`.
    pub fn error_norm(&self, c1: &[f64], c2: &[f64]) -> f64 {
        let cfg = &self.controller.cfg;
        let areas = self.problem.space.cell_areas();
        let mut s = 0.0;
        let mut total = 0.0;
        for ((a, b), w) in c1.iter().zip(c2).zip(areas) {
            let scale = cfg.atol + cfg.rtol * a.abs().max(b.abs());
            s += w * ((b - a) / scale).powi(2);
            total += w;
        }
        (s / total).sqrt()
    }

    fn attempt(&self, state: &State, dt: f64) -> Attempt {
        let cfg = &self.newton;
        let mut work = (0, 0);
        let mut take = |r: std::result::Result<NewtonOutcome, NewtonFailure>| match r {
            Ok(o) => {
                work.0 += o.iterations;
                work.1 += o.krylov_iterations;
                Some(o)
            }
            Err(f) => {
                work.0 += f.iterations;
                work.1 += f.krylov_iterations;
                None
            }
        };
        let negative = |o: &NewtonOutcome| o.c.iter().any(|&c| c < 0.0);
        let Some(full) = take(newton_solve(self.problem, &state.c, state, dt, cfg)) else {
            return Attempt::Failed(StepOutcome::NewtonFailed, work.0, work.1);
        };
        let Some(half) = take(newton_solve(self.problem, &state.c, state, 0.5 * dt, cfg)) else {
            return Attempt::Failed(StepOutcome::NewtonFailed, work.0, work.1);
        };
        if negative(&half) {
            return Attempt::Failed(StepOutcome::NegativeConductance, work.0, work.1);
        }
        let mid = State {
            t: state.t + 0.5 * dt,
            c: half.c.clone(),
            u: half.u.clone(),
        };
        let Some(second) = take(newton_solve(self.problem, &mid.c, &mid, 0.5 * dt, cfg)) else {
            return Attempt::Failed(StepOutcome::NewtonFailed, work.0, work.1);
        };
        if negative(&second) {
            return Attempt::Failed(StepOutcome::NegativeConductance, work.0, work.1);
        }
        let err = self.error_norm(&full.c, &second.c);
        Attempt::Ok(second, err, work.0, work.1)
    }

    /// Attempts steps from `state` until one is accepted; every attempt is logged.
    pub fn advance(
        &mut self,
        state: &State,
        step: usize,
        log: &mut Vec<StepReport>,
    ) -> Result<State> {
        let t_max = self.controller.cfg.t_max;
        loop {
            if log.len() >= self.controller.cfg.max_attempts {
                return Err(Error::InvalidParameter(format!(
                    "exceeded {} attempted steps at t = {}",
                    self.controller.cfg.max_attempts, state.t
                )));
            }
            let dt_ctrl = self.controller.dt;
            if dt_ctrl < self.controller.cfg.dt_min {
                return Err(Error::TimeStepUnderflow {
                    t: state.t,
                    dt: dt_ctrl,
                    dt_min: self.controller.cfg.dt_min,
                });
            }
            let dt = dt_ctrl.min(t_max - state.t);
            match self.attempt(state, dt) {
                Attempt::Failed(outcome, n, k) => {
                    log.push(self.report(step, state, dt, outcome, (n, k), f64::NAN));
                    self.controller.fail(dt);
                }
                Attempt::Ok(second, err, n, k) => {
                    if err <= 1.0 {
                        let next = State {
                            t: state.t + dt,
                            c: second.c,
                            u: second.u,
                        };
                        log.push(self.report(step, &next, dt, StepOutcome::Accepted, (n, k), err));
                        if dt == dt_ctrl {
                            self.controller.accept(dt, err);
                        }
                        return Ok(next);
                    }
                    log.push(self.report(step, state, dt, StepOutcome::ErrorTooLarge, (n, k), err));
                    self.controller.reject(dt, err);
                }
            }
        }
    }

    /// Steps until the conductance rate falls below the steady tolerance or `t_max` is reached.
    pub fn run(
        &mut self,
        state0: State,
        mut observer: impl FnMut(&State, &StepReport),
    ) -> Result<Run> {
        let cfg = self.controller.cfg;
        let c0 = self.problem.l2_norm_p0(&state0.c);
        let tol_ss = cfg.steady_tol_rel * if c0 > 0.0 { c0 } else { 1.0 };
        let mut reports = Vec::new();
        let mut state = state0;
        let mut step = 0;
        loop {
            if state.t >= cfg.t_max {
                return Ok(Run {
                    reports,
                    state,
                    stop: StopReason::TimeLimit,
                });
            }
            step += 1;
            let next = self.advance(&state, step, &mut reports)?;
            let dt = next.t - state.t;
            let diff: Vec<f64> = next.c.iter().zip(&state.c).map(|(a, b)| a - b).collect();
            let rate = self.problem.l2_norm_p0(&diff) / dt;
            observer(&next, reports.last().unwrap());
            state = next;
            if rate <= tol_ss {
                return Ok(Run {
                    reports,
                    state,
                    stop: StopReason::Steady,
                });
            }
        }
    }
}

/// Integrates from `state0` to steady state (or `t_max`).
pub fn run_to_steady(
    problem: &Problem,
    state0: State,
    newton: NewtonConfig,
    time: TimeConfig,
) -> Result<Run> {
    Stepper::new(problem, newton, time)?.run(state0, |_, _| {})
}
