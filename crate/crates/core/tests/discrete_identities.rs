use nalgebra::{DMatrix, DVector};
use plapflow::discrete::p1::{assemble_load, integrate, mean_corrected_load};
use plapflow::discrete::{
    discrete_gradient_flow, energy_gap, project_sources, qz_gap, semidiscrete_energy,
    source_bound_terms, xx_identity_deviation, EdgeWeighting, FlowConfig, Metabolic,
    SemiDiscreteField, TriGraph,
};
use plapflow::gradientflow::TimeConfig;
use plapflow::mesh::{Point, TriBase, TriMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SQRT3: f64 = 1.732_050_807_568_877_2;

fn meshes() -> Vec<TriMesh> {
    let mut out = Vec::new();
    for k in 0..=4 {
        out.push(TriMesh::equilateral(TriBase::Triangle, 1.0, k));
    }
    for k in 0..=3 {
        out.push(TriMesh::equilateral(TriBase::Rhombus, 1.0, k));
    }
    out
}

fn zero_sum(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = s.iter().sum::<f64>() / n as f64;
    s.iter_mut().for_each(|v| *v -= mean);
    s
}

fn random_graph(rng: &mut ChaCha8Rng, mesh: &TriMesh) -> TriGraph {
    let c = (0..mesh.num_edges())
        .map(|_| rng.gen_range(0.0..2.0))
        .collect();
    let s = zero_sum(rng, mesh.num_vertices());
    TriGraph::new(mesh.clone(), c, s, rng.gen_range(0.05..1.0)).unwrap()
}

#[test]
fn kirchhoff_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for mesh in meshes().into_iter().filter(|m| m.num_vertices() <= 60) {
        let g = random_graph(&mut rng, &mesh);
        for w in [EdgeWeighting::Uniform, EdgeWeighting::DiamondVolume] {
            let n = mesh.num_vertices();
            // (L + 1 1^T) U = S has the zero-mean solution for zero-sum S
            let l = g.laplacian(w).to_dense();
            let m = DMatrix::from_fn(n, n, |i, j| l[i][j] + 1.0);
            let dense = m.lu().solve(&DVector::from_vec(g.source.clone())).unwrap();
            let u = g.kirchhoff_solve(w).unwrap();
            let scale = dense.amax().max(1.0);
            for (a, b) in u.iter().zip(dense.iter()) {
                assert!((a - b).abs() < 1e-12 * scale, "{a} vs {b}");
            }
            assert!(g.kirchhoff_residual(w, &u) < 1e-10);
            assert!(u.iter().sum::<f64>().abs() < 1e-12 * n as f64);
        }
    }
}

#[test]
fn single_triangle_energies_by_hand() {
    let mesh = TriMesh::equilateral(TriBase::Triangle, 1.0, 0);
    let g = TriGraph::new(mesh, vec![0.0; 3], vec![1.0, -1.0, 0.0], 1.0).unwrap();
    let u = g.kirchhoff_solve(EdgeWeighting::Uniform).unwrap();
    let met = Metabolic {
        nu: 1.0,
        gamma: 2.0,
    };
    // edge gradients 4/9, 1/9, 1/9; boundary diamonds of area sqrt(3)/12
    let e = g.discrete_energy(&u, &met);
    assert!((e - 2.0 / 3.0).abs() < 1e-14);
    let eb = g.rescaled_energy(&u, &met);
    assert!((eb - SQRT3 / 12.0 * 2.0 * 6.0 / 9.0).abs() < 1e-14);
    let (interior, boundary) = g.rescaled_energy_parts(&u, &met);
    assert_eq!(interior, 0.0);
    assert!((boundary - eb).abs() < 1e-15);
}

#[test]
fn rescaled_graph_energy_equals_semidiscrete_energy_on_diamonds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let meshes = meshes();
    for draw in 0..50 {
        let mesh = &meshes[draw % meshes.len()];
        let g = random_graph(&mut rng, mesh);
        let met = Metabolic {
            nu: rng.gen_range(0.1..2.0),
            gamma: rng.gen_range(0.5..3.0),
        };
        let u = g.kirchhoff_solve(EdgeWeighting::DiamondVolume).unwrap();
        let eb = g.rescaled_energy(&u, &met);
        let field = SemiDiscreteField::PerDiamond(g.conductance.clone());
        let sd = semidiscrete_energy(mesh, &field, &g.fem_load(), g.r, &met).unwrap();
        assert!(
            (eb - sd.energy()).abs() <= 1e-10 * eb.abs().max(1.0),
            "draw {draw}: {eb} vs {}",
            sd.energy()
        );
        for (a, b) in u.iter().zip(&sd.u) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn xx_form_is_half_the_stiffness_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for mesh in meshes() {
        for _ in 0..12 {
            let u: Vec<f64> = (0..mesh.num_vertices())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let v: Vec<f64> = (0..mesh.num_vertices())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            worst = worst.max(xx_identity_deviation(&mesh, &u, &v));
        }
    }
    assert!(worst <= 1e-12, "{worst}");
    // orthogonal gradients: both sides vanish
    let mesh = TriMesh::equilateral(TriBase::Rhombus, 1.0, 1);
    let x: Vec<f64> = mesh.vertices.iter().map(|p| p[0]).collect();
    let y: Vec<f64> = mesh.vertices.iter().map(|p| p[1]).collect();
    assert!(xx_identity_deviation(&mesh, &x, &y) < 1e-15);
}

#[test]
fn qz_bound_holds_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let meshes = meshes();
    let mut violations = 0;
    for draw in 0..1000 {
        let mesh = &meshes[draw % meshes.len()];
        let c: Vec<f64> = (0..mesh.num_edges())
            .map(|_| rng.gen_range(0.0..10.0))
            .collect();
        let (lhs, rhs) = qz_gap(mesh, &c);
        if lhs > rhs * (1.0 + 1e-15) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn energy_gap_bound_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let meshes = meshes();
    for draw in 0..100 {
        let mesh = &meshes[draw % meshes.len()];
        let c: Vec<f64> = (0..mesh.num_edges())
            .map(|_| rng.gen_range(0.0..3.0))
            .collect();
        let load = mean_corrected_load(mesh, &|x| (2.0 * x[0]).sin() - x[1]);
        let met = Metabolic {
            nu: rng.gen_range(0.1..2.0),
            gamma: rng.gen_range(1.0..3.0),
        };
        let g = energy_gap(mesh, &c, &load, rng.gen_range(0.05..1.0), &met).unwrap();
        assert!(g.holds(), "draw {draw}: {g:?}");
    }
}

#[test]
fn energy_gap_decays_for_lipschitz_conductance() {
    let c = |x: Point| 1.0 + x[0] * x[1];
    let met = Metabolic {
        nu: 1.0,
        gamma: 2.0,
    };
    let mut prev = f64::INFINITY;
    for k in 1..=5 {
        let mesh = TriMesh::equilateral(TriBase::Rhombus, 1.0, k);
        let ce: Vec<f64> = (0..mesh.num_edges())
            .map(|e| c(mesh.edge_midpoint(e)))
            .collect();
        let load = mean_corrected_load(&mesh, &|x| x[0] - 0.5 * x[1]);
        let g = energy_gap(&mesh, &ce, &load, 0.1, &met).unwrap();
        assert!(g.gap < prev, "level {k}: {g:?}");
        prev = g.gap;
    }
}

#[test]
fn projected_sources_balance() {
    let s = |x: Point| (5.0 * x[0]).cos() * x[1] + x[0] * x[0];
    for mesh in meshes() {
        let si = project_sources(&mesh, &s);
        let total = SQRT3 / mesh.h * integrate(&mesh, &s);
        assert!((si.iter().sum::<f64>() - total).abs() < 1e-12 * total.abs().max(1.0));
        // mean-corrected constant source
        let b = mean_corrected_load(&mesh, &|_| 1.0);
        assert!(b.iter().sum::<f64>().abs() < 1e-12);
        assert!(project_sources(&mesh, &|_| 0.0).iter().all(|&v| v == 0.0));
    }
}

#[test]
fn source_bound_constant_from_full_hat_support() {
    let small = 3.0 * SQRT3 / 8.0;
    let large = 9.0 * SQRT3 / 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for mesh in meshes() {
        for _ in 0..5 {
            let (a, b, k) = (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..6.0),
            );
            let s = move |x: Point| a + b * (k * x[0]).sin() * (k * x[1]).cos();
            let (lhs, rhs) = source_bound_terms(&mesh, &s);
            assert!(lhs <= large * rhs, "{lhs} > {large} * {rhs}");
        }
    }
    // S = 1: sum S_i^2 tends to 9/(2 sqrt 3) |Omega|, above the smaller constant
    let mesh = TriMesh::equilateral(TriBase::Rhombus, 1.0, 5);
    let (lhs, rhs) = source_bound_terms(&mesh, &|_| 1.0);
    assert!(lhs > small * rhs);
    assert!(lhs <= large * rhs);
    assert!((lhs / rhs - 9.0 / (2.0 * SQRT3)).abs() < 0.2);
}

#[test]
fn load_and_sources_are_consistent() {
    let mesh = TriMesh::equilateral(TriBase::Triangle, 2.0, 3);
    let s = |x: Point| x[0] - x[1];
    let si = project_sources(&mesh, &s);
    let g = TriGraph::new(
        mesh.clone(),
        vec![1.0; mesh.num_edges()],
        vec![0.0; mesh.num_vertices()],
        0.0,
    )
    .unwrap();
    let g = TriGraph { source: si, ..g };
    for (a, b) in g.fem_load().iter().zip(assemble_load(&mesh, &s)) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn graph_flow_energy_is_nonincreasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mesh = TriMesh::equilateral(TriBase::Rhombus, 1.0, 2);
    let c = (0..mesh.num_edges())
        .map(|_| rng.gen_range(0.5..1.5))
        .collect();
    let s = project_sources(&mesh, &|x| x[0] - 0.75);
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let s = s.iter().map(|v| v - mean).collect();
    let g = TriGraph::new(mesh, c, s, 0.1).unwrap();
    let cfg = FlowConfig {
        metabolic: Metabolic {
            nu: 1.0,
            gamma: 2.0,
        },
        time: TimeConfig {
            t_max: 20.0,
            ..TimeConfig::default()
        },
        ..FlowConfig::default()
    };
    let run = discrete_gradient_flow(&g, &cfg).unwrap();
    let e: Vec<f64> = run.accepted().map(|s| s.energy).collect();
    assert!(e.len() > 5);
    assert!(e.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(run.accepted().all(|s| s.min_c >= 0.0));
}
