use std::io::Write;

use serde::{Deserialize, Serialize};

use super::graph::{EdgeWeighting, Metabolic, TriGraph};
use crate::error::{Error, Result};
use crate::gradientflow::{StepOutcome, StopReason, TimeConfig, TimeController};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub metabolic: Metabolic,
    pub time: TimeConfig,
    /// Relative increase of the energy tolerated at an accepted step.
    pub energy_slack: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            metabolic: Metabolic {
                nu: 1.0,
                gamma: 2.0,
            },
            time: TimeConfig::default(),
            energy_slack: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowStep {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub outcome: StepOutcome,
    pub error_estimate: f64,
    /// Graph energy after the attempt (unchanged state when rejected).
    pub energy: f64,
    /// Diamond-weighted energy of the same state, for reference.
    pub rescaled_energy: f64,
    pub min_c: f64,
}

#[derive(Clone, Debug)]
pub struct FlowRun {
    pub steps: Vec<FlowStep>,
    pub conductance: Vec<f64>,
    pub potential: Vec<f64>,
    pub t: f64,
    pub stop: StopReason,
}

impl FlowRun {
    pub fn accepted(&self) -> impl Iterator<Item = &FlowStep> {
        self.steps
            .iter()
            .filter(|s| s.outcome == StepOutcome::Accepted)
    }

    /// `step,t,dt,accepted,E,E_resc,min_c`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "t", "dt", "accepted", "E", "E_resc", "min_c"])?;
        for s in &self.steps {
            w.write_record(&[
                s.step.to_string(),
                format!("{:e}", s.t),
                format!("{:e}", s.dt),
                u8::from(s.outcome == StepOutcome::Accepted).to_string(),
                format!("{:e}", s.energy),
                format!("{:e}", s.rescaled_energy),
                format!("{:e}", s.min_c),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Eval {
    c: Vec<f64>,
    u: Vec<f64>,
    rate: Vec<f64>,
    energy: f64,
}

fn evaluate(graph: &mut TriGraph, c: Vec<f64>, met: &Metabolic) -> Result<Eval> {
    graph.conductance = c;
    let u = graph.kirchhoff_solve(EdgeWeighting::Uniform)?;
    let rate = graph
        .edge_gradients(&u)
        .iter()
        .zip(&graph.conductance)
        .map(|(g, &c)| g - met.nu * c.powf(met.gamma - 1.0))
        .collect();
    let energy = graph.discrete_energy(&u, met);
    Ok(Eval {
        c: std::mem::take(&mut graph.conductance),
        u,
        rate,
        energy,
    })
}

fn euler(c: &[f64], rate: &[f64], dt: f64) -> Vec<f64> {
    c.iter().zip(rate).map(|(c, r)| c + dt * r).collect()
}

fn l2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Explicit Euler integration of `dC/dt = ((U_i - U_j)/h)^2 - nu C^{gamma-1}`
/// with the potentials of the uniform Kirchhoff law. This is the gradient
/// flow of the graph energy scaled by `1/h`, so the energy is checked at
/// every step. Steps are sized by step doubling; a negative conductance or
/// an energy increase halves the step.
pub fn discrete_gradient_flow(graph: &TriGraph, cfg: &FlowConfig) -> Result<FlowRun> {
    let met = cfg.metabolic;
    if !(met.nu >= 0.0 && met.gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid metabolic parameters {met:?}"
        )));
    }
    let tc = cfg.time;
    let mut ctrl = TimeController::new(tc)?;
    let mut work = graph.clone();
    let c0 = l2(graph.conductance.iter().copied());
    let tol_ss = tc.steady_tol_rel * if c0 > 0.0 { c0 } else { 1.0 };
    let mut cur = evaluate(&mut work, graph.conductance.clone(), &met)?;
    let mut t = 0.0;
    let mut steps = Vec::new();
    let mut step = 0;
    let finish = |cur: Eval, t, steps, stop| FlowRun {
        steps,
        conductance: cur.c,
        potential: cur.u,
        t,
        stop,
    };
    loop {
        if t >= tc.t_max {
            return Ok(finish(cur, t, steps, StopReason::TimeLimit));
        }
        step += 1;
        loop {
            if steps.len() >= tc.max_attempts {
                return Err(Error::InvalidParameter(format!(
                    "exceeded {} attempted steps at t = {t}",
                    tc.max_attempts
                )));
            }
            if ctrl.dt < tc.dt_min {
                return Err(Error::TimeStepUnderflow {
                    t,
                    dt: ctrl.dt,
                    dt_min: tc.dt_min,
                });
            }
            let dt = ctrl.dt.min(tc.t_max - t);
            let full = euler(&cur.c, &cur.rate, dt);
            let half = euler(&cur.c, &cur.rate, 0.5 * dt);
            let mut report = FlowStep {
                step,
                t,
                dt,
                outcome: StepOutcome::NegativeConductance,
                error_estimate: f64::NAN,
                energy: cur.energy,
                rescaled_energy: f64::NAN,
                min_c: cur.c.iter().cloned().fold(f64::INFINITY, f64::min),
            };
            if half.iter().any(|&c| c < 0.0) {
                steps.push(report);
                ctrl.fail(dt);
                continue;
            }
            let mid = evaluate(&mut work, half, &met)?;
            let next_c = euler(&mid.c, &mid.rate, 0.5 * dt);
            if next_c.iter().any(|&c| c < 0.0) {
                steps.push(report);
                ctrl.fail(dt);
                continue;
            }
            let err = {
                let n = next_c.len().max(1) as f64;
                let s: f64 = full
                    .iter()
                    .zip(&next_c)
                    .map(|(a, b)| ((b - a) / (tc.atol + tc.rtol * a.abs().max(b.abs()))).powi(2))
                    .sum();
                (s / n).sqrt()
            };
            report.error_estimate = err;
            if err > 1.0 {
                report.outcome = StepOutcome::ErrorTooLarge;
                steps.push(report);
                ctrl.reject(dt, err);
                continue;
            }
            let next = evaluate(&mut work, next_c, &met)?;
            if next.energy > cur.energy + cfg.energy_slack * cur.energy.abs().max(1e-300) {
                // an explicit step that raises the energy is too long
                report.outcome = StepOutcome::ErrorTooLarge;
                steps.push(report);
                ctrl.fail(dt);
                continue;
            }
            let rate = l2(next.c.iter().zip(&cur.c).map(|(a, b)| a - b)) / dt;
            work.conductance = next.c.clone();
            report.outcome = StepOutcome::Accepted;
            report.t = t + dt;
            report.energy = next.energy;
            report.rescaled_energy = work.rescaled_energy(&next.u, &met);
            report.min_c = next.c.iter().cloned().fold(f64::INFINITY, f64::min);
            work.conductance.clear();
            steps.push(report);
            if dt == ctrl.dt {
                ctrl.accept(dt, err);
            }
            t += dt;
            cur = next;
            if rate <= tol_ss {
                return Ok(finish(cur, t, steps, StopReason::Steady));
            }
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{TriBase, TriMesh};

    #[test]
    fn source_free_decay_matches_scalar_ode() {
        let mesh = TriMesh::equilateral(TriBase::Rhombus, 1.0, 1);
        let (ne, nv) = (mesh.num_edges(), mesh.num_vertices());
        let c0: Vec<f64> = (0..ne).map(|e| 0.5 + 0.1 * e as f64).collect();
        let g = TriGraph::new(mesh, c0.clone(), vec![0.0; nv], 0.1).unwrap();
        let cfg = FlowConfig {
            metabolic: Metabolic {
                nu: 0.5,
                gamma: 2.0,
            },
            time: TimeConfig {
                t_max: 2.0,
                rtol: 1e-6,
                atol: 1e-8,
                ..TimeConfig::default()
            },
            ..FlowConfig::default()
        };
        let run = discrete_gradient_flow(&g, &cfg).unwrap();
        assert_eq!(run.stop, StopReason::TimeLimit);
        for (c, c0) in run.conductance.iter().zip(&c0) {
            let exact = c0 * (-0.5f64 * 2.0).exp();
            // explicit Euler: global error about t nu^2 dt / 2
            assert!((c - exact).abs() < 1e-3 * exact, "{c} vs {exact}");
        }
        let e: Vec<f64> = run.accepted().map(|s| s.energy).collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn steady_input_is_a_fixed_point() {
        // pick U, set C = ((U_i - U_j)/h)^2 / nu and S = L(C) U
        let mesh = TriMesh::equilateral(TriBase::Triangle, 1.0, 0);
        let u: [f64; 3] = [0.3, -0.2, -0.1];
        let met = Metabolic {
            nu: 2.0,
            gamma: 2.0,
        };
        let c: Vec<f64> = mesh
            .edges
            .iter()
            .map(|&[a, b]| (u[a] - u[b]).powi(2) / met.nu)
            .collect();
        let mut g = TriGraph::new(mesh, c.clone(), vec![0.0; 3], 0.0).unwrap();
        g.source = g.laplacian(EdgeWeighting::Uniform).mul_vec(&u);
        let cfg = FlowConfig {
            metabolic: met,
            ..FlowConfig::default()
        };
        let run = discrete_gradient_flow(&g, &cfg).unwrap();
        assert_eq!(run.stop, StopReason::Steady);
        assert_eq!(run.accepted().count(), 1);
        for (a, b) in run.conductance.iter().zip(&c) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
