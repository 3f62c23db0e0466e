#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use plapflow::gradientflow::{NetworkFormation, Problem};
use plapflow::linalg::{norm2, project_zero_mean, KrylovConfig};
use plapflow::plaplacian::{CaseName, TestCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Problems covering Dirichlet and pure-Neumann boundaries and
/// `gamma` below 1, near 1 and at 2.
pub fn problems(n: usize) -> Vec<(String, Problem)> {
    let mut out = Vec::new();
    for name in [CaseName::TC2, CaseName::TC4, CaseName::TC6] {
        let tc = TestCase::new(name);
        let pb = Problem::new(tc.mesh(n).unwrap(), tc.params(), tc.potential_data()).unwrap();
        out.push((name.to_string(), pb));
    }
    let net = NetworkFormation {
        n,
        ..NetworkFormation::default()
    };
    out.push(("network".into(), net.problem().unwrap()));
    out
}

pub struct Point {
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub u: Vec<f64>,
    pub dt: f64,
}

pub fn random_point(pb: &Problem, rng: &mut ChaCha8Rng) -> Point {
    let nc = pb.num_cells();
    let mut u = pb.dirichlet_values().to_vec();
    for &v in pb.space.free_nodes() {
        u[v] = rng.gen_range(-1.0..1.0);
    }
    Point {
        c_prev: (0..nc).map(|_| rng.gen_range(0.2..2.0)).collect(),
        c: (0..nc).map(|_| rng.gen_range(0.2..2.0)).collect(),
        u,
        dt: rng.gen_range(0.05..1.0),
    }
}

fn stacked_residual(pb: &Problem, x: &Point, dc: &[f64], du: &[f64], s: f64) -> Vec<f64> {
    let c: Vec<f64> = x.c.iter().zip(dc).map(|(c, d)| c + s * d).collect();
    let mut u = x.u.clone();
    for (&v, d) in pb.space.free_nodes().iter().zip(du) {
        u[v] += s * d;
    }
    let (rc, ru) = pb.residual(&x.c_prev, &c, &u, x.dt);
    rc.into_iter().chain(ru).collect()
}

/// Largest relative error of `J v` against central differences of the
/// stacked residual.
pub fn jacobian_fd_error(pb: &Problem, x: &Point, rng: &mut ChaCha8Rng, directions: usize) -> f64 {
    let jac = pb.jacobian(&x.c, &x.u, x.dt).unwrap();
    let (nc, nu) = (jac.num_c(), jac.num_u());
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let dc: Vec<f64> = (0..nc).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let du: Vec<f64> = (0..nu).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (jc, ju) = jac.apply(&dc, &du);
        let jv: Vec<f64> = jc.into_iter().chain(ju).collect();
        let h = 1e-6;
        let plus = stacked_residual(pb, x, &dc, &du, h);
        let minus = stacked_residual(pb, x, &dc, &du, -h);
        let diff: Vec<f64> = plus
            .iter()
            .zip(&minus)
            .zip(&jv)
            .map(|((p, m), j)| (p - m) / (2.0 * h) - j)
            .collect();
        worst = worst.max(norm2(&diff) / norm2(&jv));
    }
    worst
}

pub fn jacobian_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (_, pb) in problems(2) {
        for _ in 0..5 {
            let x = random_point(&pb, &mut rng);
            worst = worst.max(jacobian_fd_error(&pb, &x, &mut rng, 20));
        }
    }
    worst
}

/// Relative difference between the factorized block solve and dense LU.
pub fn block_oracle_error(pb: &Problem, x: &Point, rng: &mut ChaCha8Rng) -> f64 {
    let jac = pb.jacobian(&x.c, &x.u, x.dt).unwrap();
    let (nc, nu) = (jac.num_c(), jac.num_u());
    let kernel = pb.constant_kernel();
    let rc: Vec<f64> = (0..nc).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut ru: Vec<f64> = (0..nu).map(|_| rng.gen_range(-1.0..1.0)).collect();
    if kernel {
        project_zero_mean(&mut ru);
    }
    let krylov = KrylovConfig {
        rtol: 1e-14,
        atol: 0.0,
        ..KrylovConfig::default()
    };
    let sol = jac.solve(&rc, &ru, &krylov, kernel).unwrap();

    // dense [[A, B^T], [B, -C]], bordered by the constants when singular
    let n = nc + nu + usize::from(kernel);
    let b = jac.b.to_dense();
    let cm = jac.c.to_dense();
    let mut m = DMatrix::zeros(n, n);
    for k in 0..nc {
        m[(k, k)] = jac.a_diag[k];
    }
    for i in 0..nu {
        for k in 0..nc {
            m[(nc + i, k)] = b[i][k];
            m[(k, nc + i)] = b[i][k];
        }
        for j in 0..nu {
            m[(nc + i, nc + j)] = -cm[i][j];
        }
        if kernel {
            m[(n - 1, nc + i)] = 1.0;
            m[(nc + i, n - 1)] = 1.0;
        }
    }
    let mut rhs = DVector::zeros(n);
    for (k, v) in rc.iter().chain(&ru).enumerate() {
        rhs[k] = *v;
    }
    let dense = m.lu().solve(&rhs).expect("nonsingular");
    let ours: Vec<f64> = sol.dc.iter().chain(&sol.du).copied().collect();
    let diff: Vec<f64> = ours.iter().enumerate().map(|(k, v)| v - dense[k]).collect();
    norm2(&diff) / dense.rows(0, nc + nu).norm()
}

pub fn block_oracle_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for n in [2, 4, 8] {
        for (_, pb) in problems(n) {
            for _ in 0..3 {
                let x = random_point(&pb, &mut rng);
                worst = worst.max(block_oracle_error(&pb, &x, &mut rng));
            }
        }
    }
    worst
}
