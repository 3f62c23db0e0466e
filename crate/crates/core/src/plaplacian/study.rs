use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cases::{CaseName, TestCase};
use super::norms::{error_lp, error_quasinorm, error_w1p, fit_rate};
use crate::error::{Error, Result};
use crate::gradientflow::{NewtonConfig, Problem, Run, Stepper, StopReason, TimeConfig};

/// Newton and time-stepping settings of one relaxation run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub newton: NewtonConfig,
    pub time: TimeConfig,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            time: TimeConfig::default(),
        }
    }
}

/// Relaxes `tc` to steady state on the level with `n` cells per unit length,
/// starting from `c = 1`.
pub fn solve_level(tc: &TestCase, n: usize, settings: &SolverSettings) -> Result<(Problem, Run)> {
    let problem = Problem::new(tc.mesh(n)?, tc.params(), tc.potential_data())?;
    let state0 = problem.initial_state(vec![1.0; problem.num_cells()], &settings.newton.krylov)?;
    let run = Stepper::new(&problem, settings.newton, settings.time)?.run(state0, |_, _| {})?;
    Ok((problem, run))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub level: usize,
    pub n: usize,
    pub h: f64,
    /// Potential vertices plus conductance cells.
    pub dofs: usize,
    pub err_lp: f64,
    pub err_w1p: f64,
    pub err_quasi: f64,
    pub steps: usize,
    pub newton_total: usize,
    pub krylov_avg: f64,
    pub steady_residual: f64,
    pub stop: Option<StopReason>,
    pub runtime_s: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub case: CaseName,
    pub p: f64,
    pub reports: Vec<ErrorReport>,
    /// Number of finest levels used in the rate fit.
    pub fit_last: usize,
    pub rate_lp: Option<f64>,
    pub rate_w1p: Option<f64>,
    pub rate_quasi: Option<f64>,
}

impl ConvergenceTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "level",
            "h",
            "dofs",
            "err_Lp",
            "err_W1p",
            "err_quasi",
            "steps",
            "newton_total",
            "krylov_avg",
        ])?;
        for r in &self.reports {
            w.write_record(&[
                r.level.to_string(),
                format!("{:e}", r.h),
                r.dofs.to_string(),
                format!("{:e}", r.err_lp),
                format!("{:e}", r.err_w1p),
                format!("{:e}", r.err_quasi),
                r.steps.to_string(),
                r.newton_total.to_string(),
                format!("{:.6}", r.krylov_avg),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fitted rates over the last `fit_last` levels of `metric`.
    fn fit(
        reports: &[ErrorReport],
        fit_last: usize,
        metric: impl Fn(&ErrorReport) -> f64,
    ) -> Option<f64> {
        let ok: Vec<&ErrorReport> = reports.iter().filter(|r| r.failure.is_none()).collect();
        let tail = &ok[ok.len().saturating_sub(fit_last)..];
        let h: Vec<f64> = tail.iter().map(|r| r.h).collect();
        let e: Vec<f64> = tail.iter().map(|r| metric(r)).collect();
        if e.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        fit_rate(&h, &e)
    }
}

/// Evaluates one level: relaxation run, error norms and work counters.
pub fn evaluate_level(
    tc: &TestCase,
    level: usize,
    n: usize,
    settings: &SolverSettings,
) -> ErrorReport {
    let start = Instant::now();
    let mut rep = ErrorReport {
        level,
        n,
        h: 1.0 / n as f64,
        dofs: 0,
        err_lp: f64::NAN,
        err_w1p: f64::NAN,
        err_quasi: f64::NAN,
        steps: 0,
        newton_total: 0,
        krylov_avg: f64::NAN,
        steady_residual: f64::NAN,
        stop: None,
        runtime_s: 0.0,
        failure: None,
    };
    match solve_level(tc, n, settings) {
        Ok((problem, run)) => {
            let sp = &problem.space;
            rep.dofs = sp.num_nodes() + sp.num_cells();
            if let (Some(u), Some(g)) = (&tc.exact, &tc.exact_grad) {
                rep.err_lp = error_lp(sp, &run.state.u, u.as_ref(), tc.p);
                rep.err_w1p = error_w1p(sp, &run.state.u, g.as_ref(), tc.p);
                rep.err_quasi = error_quasinorm(sp, &run.state.u, g.as_ref(), tc.p);
            }
            rep.steps = run.accepted_steps();
            rep.newton_total = run.newton_total();
            rep.krylov_avg = run.krylov_per_newton();
            rep.steady_residual = problem.steady_residual(&run.state);
            rep.stop = Some(run.stop);
        }
        Err(e) => rep.failure = Some(e.to_string()),
    }
    rep.runtime_s = start.elapsed().as_secs_f64();
    rep
}

/// Runs every level (in parallel threads when `parallel`) and fits rates
/// over the last `fit_last` levels.
pub fn convergence_study(
    tc: &TestCase,
    levels: &[usize],
    settings: &SolverSettings,
    fit_last: usize,
    parallel: bool,
) -> Result<ConvergenceTable> {
    if levels.len() < 2 {
        return Err(Error::InvalidParameter(
            "a convergence study needs at least 2 levels".into(),
        ));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "levels must be strictly refining".into(),
        ));
    }
    let reports: Vec<ErrorReport> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = levels
                .iter()
                .enumerate()
                .map(|(l, &n)| s.spawn(move || evaluate_level(tc, l, n, settings)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("level thread panicked"))
                .collect()
        })
    } else {
        levels
            .iter()
            .enumerate()
            .map(|(l, &n)| evaluate_level(tc, l, n, settings))
            .collect()
    };
    let fit_last = fit_last.max(2);
    Ok(ConvergenceTable {
        case: tc.name,
        p: tc.p,
        rate_lp: ConvergenceTable::fit(&reports, fit_last, |r| r.err_lp),
        rate_w1p: ConvergenceTable::fit(&reports, fit_last, |r| r.err_w1p),
        rate_quasi: ConvergenceTable::fit(&reports, fit_last, |r| r.err_quasi),
        reports,
        fit_last,
    })
}
