//! Assembly of the Jacobian blocks and load vectors.
//!
//! Sign convention: load vectors hold `int S phi_i + int_{Gamma_N} g_N phi_i`,
//! so the discrete Poisson equation reads `C u = F`.

use super::quadrature::QuadratureRule;
use super::space::{Q1Space, QPoint};
use super::ModelParams;
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{BoundaryKind, Point};

/// Floor for `c^2 + eps` so that negative powers stay finite at `c = eps = 0`.
pub const REG_FLOOR: f64 = 1e-200;

/// Cellwise effective permeability `c + r`, checked for sign.
pub fn permeability(c: &[f64], r: f64) -> Result<Vec<f64>> {
    c.iter()
        .enumerate()
        .map(|(cell, &ck)| {
            let k = ck + r;
            if k < 0.0 || !k.is_finite() {
                Err(Error::NegativePermeability { cell, value: k })
            } else {
                Ok(k)
            }
        })
        .collect()
}

fn local_stiffness(qs: &[QPoint; 4]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for q in qs {
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] += q.jxw * (q.grad[a][0] * q.grad[b][0] + q.grad[a][1] * q.grad[b][1]);
            }
        }
    }
    m
}

/// `C_ij = int (c + r) grad phi_i . grad phi_j` over free vertices.
pub fn assemble_stiffness(space: &Q1Space, c: &[f64], r: f64) -> Result<CsrMatrix> {
    let k = permeability(c, r)?;
    let (pattern, pos) = space.stiffness_pattern();
    let mut m = pattern.clone();
    let vals = m.values_mut();
    for cell in 0..space.num_cells() {
        let loc = local_stiffness(space.qpoints(cell));
        for a in 0..4 {
            for b in 0..4 {
                let p = pos[cell][a][b];
                if p != usize::MAX {
                    vals[p] += k[cell] * loc[a][b];
                }
            }
        }
    }
    Ok(m)
}

/// Stiffness over all vertices, without Dirichlet elimination.
pub fn assemble_stiffness_full(space: &Q1Space, c: &[f64], r: f64) -> Result<CsrMatrix> {
    let k = permeability(c, r)?;
    let mut trip = Vec::with_capacity(16 * space.num_cells());
    for cell in 0..space.num_cells() {
        let loc = local_stiffness(space.qpoints(cell));
        let nodes = space.cell_nodes(cell);
        for a in 0..4 {
            for b in 0..4 {
                trip.push((nodes[a], nodes[b], k[cell] * loc[a][b]));
            }
        }
    }
    let n = space.num_nodes();
    Ok(CsrMatrix::from_triplets(n, n, &trip).assume_symmetric())
}

/// `y_i = sum_K k_K int_K grad u . grad phi_i` for every vertex.
pub fn apply_weighted_laplacian(space: &Q1Space, k: &[f64], u: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; space.num_nodes()];
    for cell in 0..space.num_cells() {
        let nodes = space.cell_nodes(cell);
        for q in space.qpoints(cell) {
            let g = space.grad_at(cell, q, u);
            let w = k[cell] * q.jxw;
            for a in 0..4 {
                y[nodes[a]] += w * (g[0] * q.grad[a][0] + g[1] * q.grad[a][1]);
            }
        }
    }
    y
}

/// `B_iK = -int_K grad u . grad phi_i`, free vertices by cells.
pub fn assemble_coupling(space: &Q1Space, u: &[f64]) -> CsrMatrix {
    let (pattern, pos) = space.coupling_pattern();
    let mut m = pattern.clone();
    let vals = m.values_mut();
    for cell in 0..space.num_cells() {
        for q in space.qpoints(cell) {
            let g = space.grad_at(cell, q, u);
            for a in 0..4 {
                let p = pos[cell][a];
                if p != usize::MAX {
                    vals[p] -= q.jxw * (g[0] * q.grad[a][0] + g[1] * q.grad[a][1]);
                }
            }
        }
    }
    m
}

/// `alpha(c) + beta(c)`: derivative of `nu (c^2 + eps)^{(gamma-2)/2} c`.
pub fn metabolic_derivative(c: f64, p: &ModelParams) -> f64 {
    let s = (c * c + p.eps).max(REG_FLOOR);
    let alpha = p.nu * s.powf(0.5 * (p.gamma - 2.0));
    let beta = p.nu * (p.gamma - 2.0) * s.powf(0.5 * (p.gamma - 4.0)) * c * c;
    alpha + beta
}

/// `nu (c^2 + eps)^{(gamma-2)/2} c`.
pub fn metabolic_rate(c: f64, p: &ModelParams) -> f64 {
    let s = (c * c + p.eps).max(REG_FLOOR);
    p.nu * s.powf(0.5 * (p.gamma - 2.0)) * c
}

/// Root of `c/dt + nu (c^2 + eps)^{(gamma-2)/2} c = b`, the conductance
/// equation of one cell with the potential frozen.
///
/// The left side is odd and strictly increasing for `gamma >= 1`, so the
/// root is unique and has the sign of `b`. Solved by safeguarded Newton in
/// `ln c`, which handles roots many orders of magnitude below `dt b`.
pub fn local_conductance(b: f64, dt: f64, p: &ModelParams) -> f64 {
    if b < 0.0 {
        return -local_conductance(-b, dt, p);
    }
    if !(b > 0.0) {
        return 0.0;
    }
    let phi = |c: f64| c / dt + metabolic_rate(c, p) - b;
    let hi = dt * b;
    if phi(hi) <= 0.0 {
        return hi;
    }
    let mut lo = 0.5 * hi;
    while phi(lo) >= 0.0 {
        lo *= 1e-4;
        if lo < 1e-300 {
            return 0.0;
        }
    }
    // a couple of plain Newton steps to reach roundoff in `phi`
    let polish = |mut c: f64| {
        for _ in 0..3 {
            let next = c - phi(c) / (1.0 / dt + metabolic_derivative(c, p));
            if !(next > 0.0) {
                break;
            }
            c = next;
        }
        c
    };
    let (mut a, mut z) = (lo.ln(), hi.ln());
    let mut s = z;
    for _ in 0..200 {
        let c = s.exp();
        let f = phi(c);
        if f == 0.0 {
            return c;
        }
        if f > 0.0 {
            z = s;
        } else {
            a = s;
        }
        let df = c * (1.0 / dt + metabolic_derivative(c, p));
        let mut next = s - f / df;
        if !(next > a && next < z) {
            next = 0.5 * (a + z);
        }
        if (next - s).abs() <= 1e-10 || z - a <= 1e-10 {
            return polish(next.exp());
        }
        s = next;
    }
    polish(s.exp())
}

/// Diagonal of the conductance block, `|K|/2 (1/dt + alpha + beta)`.
pub fn assemble_a_diagonal(
    space: &Q1Space,
    c: &[f64],
    params: &ModelParams,
    dt: f64,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    c.iter()
        .enumerate()
        .map(|(cell, &ck)| {
            let a = 0.5 * space.cell_area(cell) * (1.0 / dt + metabolic_derivative(ck, params));
            if a > 0.0 && a.is_finite() {
                Ok(a)
            } else {
                Err(Error::IndefiniteBlock { cell, value: a })
            }
        })
        .collect()
}

/// `F_i = int S phi_i + int_{Gamma_N} g_N phi_i` over all vertices.
///
/// The volume term uses 3x3 Gauss; `g_N(x, n)` receives the outward unit
/// normal and is integrated with 3-point Gauss on each Neumann edge.
pub fn assemble_source(
    space: &Q1Space,
    source: &dyn Fn(Point) -> f64,
    flux: Option<&dyn Fn(Point, Point) -> f64>,
) -> Vec<f64> {
    let mut f = vec![0.0; space.num_nodes()];
    let rule = QuadratureRule::gauss_quad(3);
    for cell in 0..space.num_cells() {
        let nodes = space.cell_nodes(cell);
        for q in space.qpoints_with(cell, &rule) {
            let s = source(q.x) * q.jxw;
            for a in 0..4 {
                f[nodes[a]] += s * q.phi[a];
            }
        }
    }
    if let Some(g) = flux {
        let gl = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let gw = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let mesh = &space.mesh;
        for (e, edge) in mesh.boundary_edges.iter().enumerate() {
            if edge.kind != BoundaryKind::Neumann {
                continue;
            }
            let [va, vb] = edge.vertices;
            let (pa, pb) = (mesh.vertices[va], mesh.vertices[vb]);
            let (n, len) = mesh.edge_normal(e);
            for (s, w) in gl.iter().zip(&gw) {
                let t = 0.5 * (1.0 + s);
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let v = g(x, n) * w * 0.5 * len;
                f[va] += v * (1.0 - t);
                f[vb] += v * t;
            }
        }
    }
    f
}

/// Gradients of `u` at the 2x2 Gauss points of every cell.
pub fn eval_gradients(space: &Q1Space, u: &[f64]) -> Vec<[[f64; 2]; 4]> {
    (0..space.num_cells())
        .map(|cell| {
            let qs = space.qpoints(cell);
            [0, 1, 2, 3].map(|i| space.grad_at(cell, &qs[i], u))
        })
        .collect()
}

/// Cellwise quadrature mean of `f(cell, quadrature point)`: the L2 projection onto P0.
pub fn project_p0_with(space: &Q1Space, f: impl Fn(usize, &QPoint) -> f64) -> Vec<f64> {
    (0..space.num_cells())
        .map(|cell| {
            let s: f64 = space.qpoints(cell).iter().map(|q| q.jxw * f(cell, q)).sum();
            s / space.cell_area(cell)
        })
        .collect()
}

pub fn project_p0(space: &Q1Space, f: impl Fn(Point) -> f64) -> Vec<f64> {
    project_p0_with(space, |_, q| f(q.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::QuadMesh;

    fn unit(n: usize) -> Q1Space {
        Q1Space::new(QuadMesh::unit_square(n).unwrap())
    }

    #[test]
    fn single_cell_stiffness() {
        let s = unit(1);
        let m = assemble_stiffness_full(&s, &[0.0], 1.0).unwrap();
        let d = m.to_dense();
        // vertices (0,0), (1,0), (0,1), (1,1): edge neighbours -1/6, diagonal -1/3
        let expect = [
            [4.0, -1.0, -1.0, -2.0],
            [-1.0, 4.0, -2.0, -1.0],
            [-1.0, -2.0, 4.0, -1.0],
            [-2.0, -1.0, -1.0, 4.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((6.0 * d[i][j] - expect[i][j]).abs() < 1e-14);
            }
        }
        assert!(m.mul_vec(&[1.0; 4]).iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn stiffness_is_linear_in_coefficient_and_symmetric() {
        let s = unit(3);
        let one = assemble_stiffness(&s, &vec![0.0; 9], 1.0).unwrap();
        let k = assemble_stiffness(&s, &vec![2.5; 9], 0.5).unwrap();
        for (a, b) in one.values().iter().zip(k.values()) {
            assert!((3.0 * a - b).abs() < 1e-14);
        }
        assert!(k.is_exactly_symmetric());
    }

    #[test]
    fn negative_permeability_names_cell() {
        let s = unit(2);
        let err = assemble_stiffness(&s, &[0.0, 0.0, -2.0, 0.0], 1.0).unwrap_err();
        assert_eq!(
            err,
            Error::NegativePermeability {
                cell: 2,
                value: -1.0
            }
        );
    }

    #[test]
    fn coupling_for_u_equal_x() {
        let m = QuadMesh::unit_square(1)
            .unwrap()
            .with_uniform_boundary(BoundaryKind::Neumann);
        let s = Q1Space::new(m);
        let u = s.interpolate(|x| x[0]);
        let b = assemble_coupling(&s, &u);
        let col: Vec<f64> = (0..4).map(|i| b.get(i, 0)).collect();
        // vertices (0,0), (1,0), (0,1), (1,1)
        let expect = [0.5, -0.5, 0.5, -0.5];
        for (c, e) in col.iter().zip(&expect) {
            assert!((c - e).abs() < 1e-15);
        }
        let b0 = assemble_coupling(&s, &[3.0; 4]);
        assert!(b0.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn a_diagonal_cases() {
        let s = unit(2);
        let p = ModelParams {
            r: 0.0,
            nu: 0.7,
            gamma: 2.0,
            eps: 0.0,
        };
        let a = assemble_a_diagonal(&s, &[0.3, 1.0, 2.0, 0.0], &p, 0.1).unwrap();
        for v in &a {
            assert!((v - 0.125 * (10.0 + 0.7)).abs() < 1e-14);
        }
        let p1 = ModelParams { gamma: 1.0, ..p };
        let a = assemble_a_diagonal(&s, &[0.3, 1.0, 2.0, 5.0], &p1, 0.1).unwrap();
        for v in &a {
            assert!((v - 0.125 * 10.0).abs() < 1e-12);
        }
        let pn = ModelParams {
            gamma: 0.5,
            eps: 0.0,
            ..p
        };
        assert!(matches!(
            assemble_a_diagonal(&s, &[1.0, 0.01, 1.0, 1.0], &pn, 1.0),
            Err(Error::IndefiniteBlock { cell: 1, .. })
        ));
    }

    #[test]
    fn source_partition_of_unity() {
        let s = unit(5);
        let f = assemble_source(&s, &|_| 1.0, None);
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let z = assemble_source(&s, &|_| 0.0, Some(&|_, _| 0.0));
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn neumann_flux_of_unit_normal_component() {
        // g = n_x integrates to zero around a closed boundary; |g| = 1 gives the perimeter
        let m = QuadMesh::lshape(2)
            .unwrap()
            .with_uniform_boundary(BoundaryKind::Neumann);
        let s = Q1Space::new(m);
        let f = assemble_source(&s, &|_| 0.0, Some(&|_, n: Point| n[0]));
        assert!(f.iter().sum::<f64>().abs() < 1e-14);
        let f = assemble_source(&s, &|_| 0.0, Some(&|_, _| 1.0));
        assert!((f.iter().sum::<f64>() - 8.0).abs() < 1e-13);
    }

    #[test]
    fn projection_and_gradients() {
        let s = unit(1);
        let p = project_p0(&s, |x| x[0]);
        assert!((p[0] - 0.5).abs() < 1e-15);
        let p = project_p0(&s, |_| 3.0);
        assert!((p[0] - 3.0).abs() < 1e-15);
        let g = eval_gradients(&s, &[2.0; 4]);
        assert!(g[0]
            .iter()
            .all(|v| v[0].abs() < 1e-14 && v[1].abs() < 1e-14));
    }
}
