use plapflow::gradientflow::{NetworkFormation, StopReason};
use plapflow::plaplacian::{solve_level, CaseName, SolverSettings, TestCase};

fn nonincreasing(e: &[f64]) -> bool {
    e.windows(2)
        .all(|w| w[1] <= w[0] + 1e-8 * w[0].abs().max(1.0))
}

#[test]
fn plap_relaxation_dissipates_and_stays_positive() {
    for name in [CaseName::TC2, CaseName::TC6] {
        let (pb, run) = solve_level(&TestCase::new(name), 8, &SolverSettings::default()).unwrap();
        assert_eq!(run.stop, StopReason::Steady, "{name}");
        let acc: Vec<_> = run.reports.iter().filter(|r| r.accepted()).collect();
        let lyap: Vec<f64> = acc.iter().map(|r| r.lyapunov).collect();
        assert!(nonincreasing(&lyap), "{name}: {lyap:?}");
        assert!(acc.iter().all(|r| r.min_c >= 0.0));
        assert!(run.state.c.iter().all(|&c| c >= 0.0));
        assert!(pb.steady_residual(&run.state) < 1.0);
    }
}

#[test]
fn network_formation_energy_is_monotone() {
    let net = NetworkFormation {
        n: 16,
        t_max: 5.0,
        ..NetworkFormation::default()
    };
    let pb = net.problem().unwrap();
    let settings = SolverSettings {
        time: plapflow::gradientflow::TimeConfig {
            t_max: net.t_max,
            ..Default::default()
        },
        ..Default::default()
    };
    let state0 = pb
        .initial_state(vec![net.c0; pb.num_cells()], &settings.newton.krylov)
        .unwrap();
    let run =
        plapflow::gradientflow::run_to_steady(&pb, state0, settings.newton, settings.time).unwrap();
    let e: Vec<f64> = run
        .reports
        .iter()
        .filter(|r| r.accepted())
        .map(|r| r.energy)
        .collect();
    assert!(e.len() > 3);
    assert!(nonincreasing(&e));
    assert!(run
        .reports
        .iter()
        .filter(|r| r.accepted())
        .all(|r| r.min_c >= 0.0));
}

#[test]
fn identical_configuration_gives_identical_trajectory() {
    let tc = TestCase::new(CaseName::TC1);
    let s = SolverSettings::default();
    let (_, a) = solve_level(&tc, 8, &s).unwrap();
    let (_, b) = solve_level(&tc, 8, &s).unwrap();
    assert_eq!(a.reports, b.reports);
    assert_eq!(a.state, b.state);
}

#[test]
fn steady_residual_shrinks_under_refinement() {
    let tc = TestCase::new(CaseName::TC2);
    let s = SolverSettings::default();
    let res: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let (pb, run) = solve_level(&tc, n, &s).unwrap();
            pb.steady_residual(&run.state)
        })
        .collect();
    assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
}
