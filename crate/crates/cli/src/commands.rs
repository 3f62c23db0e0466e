use std::path::{Path, PathBuf};
use std::time::Instant;

use plapflow::discrete::p1::{integrate, mean_corrected_load};
use plapflow::discrete::{
    discrete_gradient_flow, energy_gap, project_sources, qz_gap, refinement_study,
    semidiscrete_energy, source_bound_terms, write_refinement_csv, xx_identity_deviation,
    EdgeWeighting, FlowConfig, RefinementConfig, SemiDiscreteField, TriGraph,
};
use plapflow::fem::QuadratureRule;
use plapflow::gradientflow::{Problem, Run, State, Stepper, StopReason, TimeConfig};
use plapflow::io::{create, log10_floored, write_quad_vtk};
use plapflow::mesh::vtk::Scalars;
use plapflow::mesh::{Point, TriMesh};
use plapflow::plaplacian::{convergence_study, solve_level, TestCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    ConvergenceRun, DiscreteRun, DiscreteStudy, NetworkRun, PlapRun, RunConfig, Scenario, Tc6Run,
};

const LOG_FLOOR: f64 = 1e-30;

/// Files written, soft failures and a JSON summary of one run.
#[derive(Debug, Default, Serialize)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    /// Levels, p values or checks that did not complete.
    pub failures: Vec<String>,
    pub summary: Value,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a RunConfig,
    outputs: &'a [PathBuf],
    failures: &'a [String],
    summary: &'a Value,
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut out = match &cfg.scenario {
        Scenario::NetworkFormation(n) => network_formation(cfg, n)?,
        Scenario::Plap(p) => plap(cfg, p)?,
        Scenario::Convergence(c) => convergence(cfg, c)?,
        Scenario::Tc6Sweep(t) => tc6(cfg, t)?,
        Scenario::DiscreteStudy(d) => discrete(cfg, d)?,
    };
    let path = cfg.output_dir.join("manifest.json");
    out.outputs.push(path.clone());
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        outputs: &out.outputs,
        failures: &out.failures,
        summary: &out.summary,
    };
    serde_json::to_writer_pretty(create(&path)?, &manifest)?;
    Ok(out)
}

fn write_fields(path: &Path, problem: &Problem, state: &State, title: &str) -> anyhow::Result<()> {
    let sp = &problem.space;
    let gm1 = problem.params.gamma - 1.0;
    let center = QuadratureRule::gauss_quad(1);
    let pointwise: Vec<f64> = (0..sp.num_cells())
        .map(|k| {
            let q = &sp.qpoints_with(k, &center)[0];
            let g = sp.grad_at(k, q, &state.u);
            g[0] * g[0] + g[1] * g[1] - state.c[k].max(0.0).powf(gm1)
        })
        .collect();
    let projected = problem.steady_defect_p0(state);
    let logc = log10_floored(&state.c, LOG_FLOOR);
    write_quad_vtk(
        path,
        &sp.mesh,
        title,
        &[Scalars::new("u", &state.u)],
        &[
            Scalars::new("log10_c", &logc),
            Scalars::new("defect_center", &pointwise),
            Scalars::new("defect_p0", &projected),
        ],
    )?;
    Ok(())
}

fn write_run_csv(path: &Path, run: &Run) -> anyhow::Result<()> {
    run.write_csv(create(path)?)?;
    Ok(())
}

fn network_formation(cfg: &RunConfig, nr: &NetworkRun) -> anyhow::Result<Outcome> {
    let setup = &nr.setup;
    let problem = setup.problem_with(nr.mean_correct)?;
    let mut time: TimeConfig = cfg.solver.time;
    time.t_max = setup.t_max;
    let newton = cfg.solver.newton;
    let state0 = problem.initial_state(vec![setup.c0; problem.num_cells()], &newton.krylov)?;
    let e0 = problem.energy(&state0);
    let dir = &cfg.output_dir;
    let mut out = Outcome::default();
    let mut pending: Vec<f64> = nr
        .snapshots
        .iter()
        .copied()
        .filter(|&t| t <= setup.t_max)
        .collect();
    pending.sort_by(f64::total_cmp);
    let snap = |state: &State, out: &mut Outcome| -> anyhow::Result<()> {
        let path = dir.join(format!("log10c_t{:09.4}.vtk", state.t));
        let logc = log10_floored(&state.c, LOG_FLOOR);
        write_quad_vtk(
            &path,
            &problem.space.mesh,
            "log10 conductance",
            &[],
            &[Scalars::new("log10_c", &logc)],
        )?;
        out.outputs.push(path);
        Ok(())
    };
    if pending.first() == Some(&0.0) {
        snap(&state0, &mut out)?;
        pending.remove(0);
    }
    let mut snap_err = None;
    let start = Instant::now();
    let run = Stepper::new(&problem, newton, time)?.run(state0, |state, rep| {
        if rep.step % 20 == 0 {
            eprintln!(
                "step {} t {:.4} dt {:.3e} E {:.6e}",
                rep.step, state.t, rep.dt, rep.energy
            );
        }
        while pending.first().is_some_and(|&t| state.t >= t) {
            pending.remove(0);
            if let Err(e) = snap(state, &mut out) {
                snap_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = snap_err {
        return Err(e);
    }
    snap(&run.state, &mut out)?;
    let steps = dir.join("steps.csv");
    write_run_csv(&steps, &run)?;
    out.outputs.push(steps);
    let mut prev = e0;
    let mut worst: f64 = 0.0;
    for r in run.reports.iter().filter(|r| r.accepted()) {
        worst = worst.max((r.energy - prev) / prev.abs().max(f64::MIN_POSITIVE));
        prev = r.energy;
    }
    let min_c = run
        .reports
        .iter()
        .filter(|r| r.accepted())
        .map(|r| r.min_c)
        .fold(f64::INFINITY, f64::min);
    out.summary = json!({
        "t": run.state.t,
        "stop": run.stop,
        "accepted_steps": run.accepted_steps(),
        "newton_total": run.newton_total(),
        "energy_initial": e0,
        "energy_final": problem.energy(&run.state),
        "max_relative_energy_increase": worst,
        "min_c": min_c,
        "runtime_s": start.elapsed().as_secs_f64(),
    });
    Ok(out)
}

fn plap(cfg: &RunConfig, pr: &PlapRun) -> anyhow::Result<Outcome> {
    let tc = TestCase::with_center(pr.case, pr.center);
    let start = Instant::now();
    let (problem, run) = solve_level(&tc, pr.n, &cfg.solver)?;
    let mut out = Outcome::default();
    let steps = cfg.output_dir.join("steps.csv");
    write_run_csv(&steps, &run)?;
    let fields = cfg.output_dir.join("fields.vtk");
    write_fields(
        &fields,
        &problem,
        &run.state,
        &format!("{} n={}", pr.case, pr.n),
    )?;
    out.outputs.extend([steps, fields]);
    let mut summary = json!({
        "case": pr.case,
        "n": pr.n,
        "p": tc.p,
        "stop": run.stop,
        "accepted_steps": run.accepted_steps(),
        "newton_total": run.newton_total(),
        "krylov_per_newton": run.krylov_per_newton(),
        "steady_residual": problem.steady_residual(&run.state),
        "runtime_s": start.elapsed().as_secs_f64(),
    });
    if let (Some(u), Some(g)) = (&tc.exact, &tc.exact_grad) {
        let sp = &problem.space;
        summary["err_Lp"] =
            plapflow::plaplacian::error_lp(sp, &run.state.u, u.as_ref(), tc.p).into();
        summary["err_W1p"] =
            plapflow::plaplacian::error_w1p(sp, &run.state.u, g.as_ref(), tc.p).into();
        summary["err_quasi"] =
            plapflow::plaplacian::error_quasinorm(sp, &run.state.u, g.as_ref(), tc.p).into();
    }
    out.summary = summary;
    Ok(out)
}

fn convergence(cfg: &RunConfig, cr: &ConvergenceRun) -> anyhow::Result<Outcome> {
    let tc = TestCase::with_center(cr.case, cr.center);
    let table = convergence_study(&tc, &cr.levels, &cfg.solver, cr.fit_last, cr.parallel)?;
    let mut out = Outcome::default();
    let path = cfg.output_dir.join(format!("convergence_{}.csv", cr.case));
    table.write_csv(create(&path)?)?;
    out.outputs.push(path);
    let path = cfg.output_dir.join(format!("rates_{}.csv", cr.case));
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["metric", "rate", "fit_last"])?;
    for (m, r) in [
        ("Lp", table.rate_lp),
        ("W1p", table.rate_w1p),
        ("quasi", table.rate_quasi),
    ] {
        let r = r.map(|v| format!("{v:e}")).unwrap_or_else(|| "nan".into());
        w.write_record([m, r.as_str(), table.fit_last.to_string().as_str()])?;
    }
    w.flush()?;
    out.outputs.push(path);
    for r in &table.reports {
        if let Some(f) = &r.failure {
            out.failures
                .push(format!("level {} (n = {}): {f}", r.level, r.n));
        }
    }
    out.summary = serde_json::to_value(&table)?;
    Ok(out)
}

struct Tc6Result {
    p: f64,
    outcome: Result<(usize, usize, f64, StopReason, f64), String>,
    outputs: Vec<PathBuf>,
}

fn tc6_one(cfg: &RunConfig, p: f64, n: usize) -> Tc6Result {
    let mut outputs = Vec::new();
    let start = Instant::now();
    let mut go = || -> anyhow::Result<(usize, usize, f64, StopReason, f64)> {
        let tc = TestCase::tc6(p)?;
        let (problem, run) = solve_level(&tc, n, &cfg.solver)?;
        let steps = cfg.output_dir.join(format!("steps_p{p}.csv"));
        write_run_csv(&steps, &run)?;
        let fields = cfg.output_dir.join(format!("fields_p{p}.vtk"));
        write_fields(&fields, &problem, &run.state, &format!("TC6 p={p} n={n}"))?;
        outputs.extend([steps, fields]);
        Ok((
            run.accepted_steps(),
            run.newton_total(),
            problem.steady_residual(&run.state),
            run.stop,
            start.elapsed().as_secs_f64(),
        ))
    };
    let outcome = go().map_err(|e| e.to_string());
    Tc6Result {
        p,
        outcome,
        outputs,
    }
}

fn tc6(cfg: &RunConfig, tr: &Tc6Run) -> anyhow::Result<Outcome> {
    let results: Vec<Tc6Result> = if tr.parallel {
        std::thread::scope(|s| {
            let hs: Vec<_> = tr
                .ps
                .iter()
                .map(|&p| s.spawn(move || tc6_one(cfg, p, tr.n)))
                .collect();
            hs.into_iter()
                .map(|h| h.join().expect("tc6 worker panicked"))
                .collect()
        })
    } else {
        tr.ps.iter().map(|&p| tc6_one(cfg, p, tr.n)).collect()
    };
    let mut out = Outcome::default();
    let path = cfg.output_dir.join("tc6_summary.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record([
        "p",
        "n",
        "steps",
        "newton_total",
        "steady_residual",
        "stop",
        "runtime_s",
    ])?;
    let mut rows = Vec::new();
    for r in results {
        out.outputs.extend(r.outputs);
        match r.outcome {
            Ok((steps, newton, res, stop, secs)) => {
                let stop = serde_json::to_value(stop)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string();
                w.write_record(&[
                    r.p.to_string(),
                    tr.n.to_string(),
                    steps.to_string(),
                    newton.to_string(),
                    format!("{res:e}"),
                    stop.clone(),
                    format!("{secs:.3}"),
                ])?;
                if stop != "steady" {
                    out.failures
                        .push(format!("p = {}: stopped at the time limit", r.p));
                }
                rows.push(json!({"p": r.p, "steps": steps, "newton_total": newton, "steady_residual": res, "stop": stop}));
            }
            Err(e) => {
                out.failures.push(format!("p = {}: {e}", r.p));
                rows.push(json!({"p": r.p, "failure": e}));
            }
        }
    }
    w.flush()?;
    out.outputs.push(path);
    out.summary = json!({ "n": tr.n, "runs": rows });
    Ok(out)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn discrete(cfg: &RunConfig, dr: &DiscreteRun) -> anyhow::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let meshes: Vec<TriMesh> = (0..=dr.refinements)
        .map(|k| TriMesh::equilateral(dr.base, 1.0, k))
        .collect();
    let mut out = Outcome::default();
    let dir = &cfg.output_dir;
    let table = |name: &str,
                 header: &[&str],
                 rows: Vec<Vec<String>>,
                 out: &mut Outcome|
     -> anyhow::Result<()> {
        let path = dir.join(name);
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        out.outputs.push(path);
        Ok(())
    };
    let mesh_of = |i: usize| &meshes[i % meshes.len()];
    let e = |v: f64| format!("{v:e}");
    match dr.study {
        DiscreteStudy::QzGap => {
            let mut rows = Vec::new();
            let mut violations = 0;
            for i in 0..dr.samples {
                let m = mesh_of(i);
                let c = random_vec(&mut rng, m.num_edges(), 0.0, 10.0);
                let (lhs, rhs) = qz_gap(m, &c);
                let ok = lhs <= rhs;
                violations += usize::from(!ok);
                rows.push(vec![
                    i.to_string(),
                    m.num_triangles().to_string(),
                    e(lhs),
                    e(rhs),
                    u8::from(ok).to_string(),
                ]);
            }
            table(
                "qz_gap.csv",
                &["sample", "triangles", "qz_sup", "bound", "holds"],
                rows,
                &mut out,
            )?;
            if violations > 0 {
                out.failures.push(format!("{violations} bound violations"));
            }
            out.summary = json!({ "samples": dr.samples, "violations": violations });
        }
        DiscreteStudy::Energies => {
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for i in 0..dr.samples {
                let m = mesh_of(i);
                let c = random_vec(&mut rng, m.num_edges(), 0.0, 2.0);
                let mut s = random_vec(&mut rng, m.num_vertices(), -1.0, 1.0);
                let mean = s.iter().sum::<f64>() / s.len() as f64;
                s.iter_mut().for_each(|v| *v -= mean);
                let g = TriGraph::new(m.clone(), c.clone(), s, dr.r)?;
                let u = g.kirchhoff_solve(EdgeWeighting::DiamondVolume)?;
                let eb = g.rescaled_energy(&u, &dr.metabolic);
                let sd = semidiscrete_energy(
                    m,
                    &SemiDiscreteField::PerDiamond(c),
                    &g.fem_load(),
                    g.r,
                    &dr.metabolic,
                )?;
                let rel = (eb - sd.energy()).abs() / eb.abs().max(1.0);
                worst = worst.max(rel);
                rows.push(vec![
                    i.to_string(),
                    m.num_triangles().to_string(),
                    e(eb),
                    e(sd.energy()),
                    e(rel),
                ]);
            }
            table(
                "energies.csv",
                &["sample", "triangles", "E_graph", "E_Q", "rel_diff"],
                rows,
                &mut out,
            )?;
            if worst > 1e-10 {
                out.failures
                    .push(format!("largest relative difference {worst:e}"));
            }
            out.summary = json!({ "samples": dr.samples, "max_relative_difference": worst });
        }
        DiscreteStudy::XxIdentity => {
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for i in 0..dr.samples {
                let m = mesh_of(i);
                let u = random_vec(&mut rng, m.num_vertices(), -1.0, 1.0);
                let v = random_vec(&mut rng, m.num_vertices(), -1.0, 1.0);
                let d = xx_identity_deviation(m, &u, &v);
                worst = worst.max(d);
                rows.push(vec![i.to_string(), m.num_triangles().to_string(), e(d)]);
            }
            table(
                "xx_identity.csv",
                &["sample", "triangles", "max_deviation"],
                rows,
                &mut out,
            )?;
            if worst > 1e-12 {
                out.failures.push(format!("largest deviation {worst:e}"));
            }
            out.summary = json!({ "samples": dr.samples, "max_deviation": worst });
        }
        DiscreteStudy::EnergyGap => {
            let mut rows = Vec::new();
            let mut violations = 0;
            for i in 0..dr.samples {
                let m = mesh_of(i);
                let c = random_vec(&mut rng, m.num_edges(), 0.0, 3.0);
                let load = mean_corrected_load(m, &|x| (2.0 * x[0]).sin() - x[1]);
                let g = energy_gap(m, &c, &load, dr.r, &dr.metabolic)?;
                violations += usize::from(!g.holds());
                rows.push(vec![
                    i.to_string(),
                    m.num_triangles().to_string(),
                    e(g.energy_q),
                    e(g.energy_z),
                    e(g.gap),
                    e(g.bound),
                    e(g.bound_d),
                ]);
            }
            table(
                "energy_gap.csv",
                &[
                    "sample",
                    "triangles",
                    "E_Q",
                    "E_Z",
                    "gap",
                    "bound",
                    "bound_D",
                ],
                rows,
                &mut out,
            )?;
            if violations > 0 {
                out.failures.push(format!("{violations} bound violations"));
            }
            out.summary = json!({ "samples": dr.samples, "violations": violations });
        }
        DiscreteStudy::Sources => {
            let small = 3.0 * 3f64.sqrt() / 8.0;
            let large = 9.0 * 3f64.sqrt() / 4.0;
            let mut rows = Vec::new();
            let (mut small_fail, mut large_fail, mut worst_balance) = (0, 0, 0.0f64);
            for i in 0..dr.samples {
                let m = mesh_of(i);
                let (a, b, k) = (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.5..6.0),
                );
                let s = move |x: Point| a + b * (k * x[0]).sin() * (k * x[1]).cos();
                let si = project_sources(m, &s);
                let total = 3f64.sqrt() / m.h * integrate(m, &s);
                let balance = (si.iter().sum::<f64>() - total).abs() / total.abs().max(1.0);
                worst_balance = worst_balance.max(balance);
                let (lhs, rhs) = source_bound_terms(m, &s);
                small_fail += usize::from(lhs > small * rhs);
                large_fail += usize::from(lhs > large * rhs);
                rows.push(vec![
                    i.to_string(),
                    m.num_triangles().to_string(),
                    e(lhs),
                    e(rhs),
                    e(lhs / rhs),
                    e(balance),
                ]);
            }
            table(
                "sources.csv",
                &[
                    "sample",
                    "triangles",
                    "sum_Si2",
                    "int_S2",
                    "ratio",
                    "balance_error",
                ],
                rows,
                &mut out,
            )?;
            if large_fail > 0 || worst_balance > 1e-12 {
                out.failures.push(format!("{large_fail} violations of the 9 sqrt(3)/4 bound, balance error {worst_balance:e}"));
            }
            out.summary = json!({
                "samples": dr.samples,
                "violations_3sqrt3_over_8": small_fail,
                "violations_9sqrt3_over_4": large_fail,
                "max_balance_error": worst_balance,
            });
        }
        DiscreteStudy::Refinement => {
            let rc = RefinementConfig {
                base: dr.base,
                levels: [1, dr.refinements.max(2)],
                r: dr.r,
                metabolic: dr.metabolic,
                ..RefinementConfig::default()
            };
            let rows = refinement_study(&|x| x[0] + x[1], &|x| (3.0 * x[0]).cos() + x[1], &rc)?;
            let path = dir.join("refinement.csv");
            write_refinement_csv(&rows, create(&path)?)?;
            out.outputs.push(path);
            if rows
                .windows(2)
                .any(|w| w[1].gap_graph() >= w[0].gap_graph())
            {
                out.failures.push("graph energy gap not decreasing".into());
            }
            out.summary = json!({ "rows": rows });
        }
        DiscreteStudy::Flow => {
            let m = meshes.last().expect("at least one mesh").clone();
            let c = random_vec(&mut rng, m.num_edges(), 0.5, 1.5);
            let mut s = project_sources(&m, &|x| x[0] - x[1]);
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            s.iter_mut().for_each(|v| *v -= mean);
            let g = TriGraph::new(m, c, s, dr.r)?;
            let fc = FlowConfig {
                metabolic: dr.metabolic,
                time: TimeConfig {
                    t_max: dr.t_max,
                    ..cfg.solver.time
                },
                ..FlowConfig::default()
            };
            let run = discrete_gradient_flow(&g, &fc)?;
            let path = dir.join("flow_steps.csv");
            run.write_csv(create(&path)?)?;
            out.outputs.push(path);
            let graph = TriGraph {
                conductance: run.conductance.clone(),
                ..g
            };
            let path = dir.join("flow_edges.csv");
            graph.write_edge_list(create(&path)?)?;
            out.outputs.push(path);
            let e: Vec<f64> = run.accepted().map(|s| s.energy).collect();
            let increases = e.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-12)).count();
            if increases > 0 {
                out.failures.push(format!("{increases} energy increases"));
            }
            out.summary = json!({ "t": run.t, "stop": run.stop, "accepted_steps": e.len(), "energy_increases": increases });
        }
    }
    Ok(out)
}
