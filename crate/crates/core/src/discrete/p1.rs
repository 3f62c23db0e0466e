//! Linear finite elements on equilateral triangulations.

use super::graph::Metabolic;
use crate::error::{Error, Result};
use crate::fem::QuadratureRule;
use crate::linalg::{krylov_solve, CsrMatrix, KrylovConfig};
use crate::mesh::{Point, TriMesh};

/// Gradients of the three hat functions on triangle `t`.
pub fn hat_gradients(mesh: &TriMesh, t: usize) -> [Point; 3] {
    let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    // grad psi_k is the inward normal of the opposite edge over det
    let g = |p: Point, q: Point| [(p[1] - q[1]) / det, (q[0] - p[0]) / det];
    [g(b, c), g(c, a), g(a, b)]
}

/// Gradient of the P1 field `u` on triangle `t`.
pub fn gradient(mesh: &TriMesh, t: usize, u: &[f64]) -> Point {
    let g = hat_gradients(mesh, t);
    let v = mesh.triangles[t];
    let mut out = [0.0; 2];
    for k in 0..3 {
        out[0] += u[v[k]] * g[k][0];
        out[1] += u[v[k]] * g[k][1];
    }
    out
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Quadrature points with their weights times the Jacobian, and barycentric coordinates.
fn qpoints(mesh: &TriMesh, t: usize) -> impl Iterator<Item = (Point, f64, [f64; 3])> + '_ {
    let rule = QuadratureRule::triangle3();
    let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
    let jac = 2.0 * mesh.triangle_area(t);
    (0..rule.len()).map(move |q| {
        let [s, r] = rule.points[q];
        let x = [
            a[0] + s * (b[0] - a[0]) + r * (c[0] - a[0]),
            a[1] + s * (b[1] - a[1]) + r * (c[1] - a[1]),
        ];
        (x, rule.weights[q] * jac, [1.0 - s - r, s, r])
    })
}

/// `int f` by the three-point rule on every triangle.
pub fn integrate(mesh: &TriMesh, f: &dyn Fn(Point) -> f64) -> f64 {
    (0..mesh.num_triangles())
        .flat_map(|t| qpoints(mesh, t))
        .map(|(x, w, _)| w * f(x))
        .sum()
}

/// `int S psi_i` for every vertex.
pub fn assemble_load(mesh: &TriMesh, s: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_triangles() {
        let v = mesh.triangles[t];
        for (x, w, lam) in qpoints(mesh, t) {
            let sv = s(x);
            for k in 0..3 {
                b[v[k]] += w * sv * lam[k];
            }
        }
    }
    b
}

/// `int psi_i`, one third of the adjacent triangle areas.
pub fn lumped_mass(mesh: &TriMesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_triangles() {
        let a = mesh.triangle_area(t) / 3.0;
        for &v in &mesh.triangles[t] {
            m[v] += a;
        }
    }
    m
}

/// Load of `S - mean(S)`, compatible with the pure Neumann problem.
pub fn mean_corrected_load(mesh: &TriMesh, s: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let mean = integrate(mesh, s) / mesh.area();
    let mut b = assemble_load(mesh, s);
    for (bi, mi) in b.iter_mut().zip(lumped_mass(mesh)) {
        *bi -= mean * mi;
    }
    b
}

/// `int 2 (c + r) grad psi_j . (X (x) X) grad psi_i` with `c` and `X` constant on
/// each diamond: the third of triangle `T` next to edge `e` carries `c_e` and
/// the unit edge direction.
pub fn assemble_xx(mesh: &TriMesh, c_edge: &[f64], r: f64) -> CsrMatrix {
    let mut trip = Vec::with_capacity(27 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let g = hat_gradients(mesh, t);
        let v = mesh.triangles[t];
        let third = mesh.triangle_area(t) / 3.0;
        for &e in &mesh.triangle_edges[t] {
            let x = mesh.edge_direction(e);
            let k = 2.0 * (c_edge[e] + r) * third;
            let p = g.map(|gi| dot(x, gi));
            for i in 0..3 {
                for j in 0..3 {
                    trip.push((v[i], v[j], k * p[i] * p[j]));
                }
            }
        }
    }
    let n = mesh.num_vertices();
    CsrMatrix::from_triplets(n, n, &trip)
        .into_symmetric()
        .expect("symmetric by construction")
}

/// `int (c + r) grad psi_j . grad psi_i` with `c` constant per triangle.
pub fn assemble_plain(mesh: &TriMesh, c_tri: &[f64], r: f64) -> CsrMatrix {
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let g = hat_gradients(mesh, t);
        let v = mesh.triangles[t];
        let k = (c_tri[t] + r) * mesh.triangle_area(t);
        for i in 0..3 {
            for j in 0..3 {
                trip.push((v[i], v[j], k * dot(g[i], g[j])));
            }
        }
    }
    let n = mesh.num_vertices();
    CsrMatrix::from_triplets(n, n, &trip)
        .into_symmetric()
        .expect("symmetric by construction")
}

/// Zero-mean solution of a pure Neumann system.
pub fn neumann_solve(a: &CsrMatrix, load: &[f64]) -> Result<Vec<f64>> {
    let imbalance: f64 = load.iter().sum();
    let scale = load.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if imbalance.abs() > 1e-12 * scale {
        return Err(Error::IncompatibleSource { imbalance });
    }
    let cfg = KrylovConfig {
        rtol: 1e-13,
        atol: 1e-16,
        max_iters: 20 * a.nrows() + 100,
        ..KrylovConfig::default()
    };
    Ok(krylov_solve(a, load, &cfg, true)?.0)
}

/// Conductance of the semi-discrete energy.
#[derive(Clone, Debug, PartialEq)]
pub enum SemiDiscreteField {
    /// Constant on each diamond, one value per edge.
    PerDiamond(Vec<f64>),
    /// Constant on each triangle.
    PerTriangle(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemiDiscrete {
    pub u: Vec<f64>,
    /// `int 2 (c + r) |X . grad u|^2`.
    pub kinetic: f64,
    /// `int (nu / gamma) c^gamma`.
    pub metabolic: f64,
    /// `||grad u||_{L^2}`.
    pub grad_norm: f64,
}

impl SemiDiscrete {
    pub fn energy(&self) -> f64 {
        self.kinetic + self.metabolic
    }
}

/// Solves the P1 problem for `field` with right-hand side `load` and
/// evaluates the energy. Per-triangle fields use the plain stiffness form, to
/// which the `X (x) X` form reduces on equilateral triangles.
pub fn semidiscrete_energy(
    mesh: &TriMesh,
    field: &SemiDiscreteField,
    load: &[f64],
    r: f64,
    met: &Metabolic,
) -> Result<SemiDiscrete> {
    let (len, expected) = match field {
        SemiDiscreteField::PerDiamond(c) => (c.len(), mesh.num_edges()),
        SemiDiscreteField::PerTriangle(c) => (c.len(), mesh.num_triangles()),
    };
    if len != expected || load.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "field of length {len} (expected {expected}), load of length {}",
            load.len()
        )));
    }
    let a = match field {
        SemiDiscreteField::PerDiamond(c) => assemble_xx(mesh, c, r),
        SemiDiscreteField::PerTriangle(c) => assemble_plain(mesh, c, r),
    };
    let u = neumann_solve(&a, load)?;
    let mut out = SemiDiscrete {
        u: Vec::new(),
        kinetic: 0.0,
        metabolic: 0.0,
        grad_norm: 0.0,
    };
    for t in 0..mesh.num_triangles() {
        let g = gradient(mesh, t, &u);
        let area = mesh.triangle_area(t);
        out.grad_norm += area * dot(g, g);
        match field {
            SemiDiscreteField::PerDiamond(c) => {
                for &e in &mesh.triangle_edges[t] {
                    let xg = dot(mesh.edge_direction(e), g);
                    out.kinetic += area / 3.0 * 2.0 * (c[e] + r) * xg * xg;
                    out.metabolic += area / 3.0 * met.cost(c[e]);
                }
            }
            SemiDiscreteField::PerTriangle(c) => {
                out.kinetic += area * (c[t] + r) * dot(g, g);
                out.metabolic += area * met.cost(c[t]);
            }
        }
    }
    out.grad_norm = out.grad_norm.sqrt();
    out.u = u;
    Ok(out)
}

/// Largest per-triangle deviation of `int_T grad u . (X (x) X) grad v` from
/// `1/2 int_T grad u . grad v`.
pub fn xx_identity_deviation(mesh: &TriMesh, u: &[f64], v: &[f64]) -> f64 {
    (0..mesh.num_triangles())
        .map(|t| {
            let (gu, gv) = (gradient(mesh, t, u), gradient(mesh, t, v));
            let third = mesh.triangle_area(t) / 3.0;
            let lhs: f64 = mesh.triangle_edges[t]
                .iter()
                .map(|&e| {
                    let x = mesh.edge_direction(e);
                    third * dot(x, gu) * dot(x, gv)
                })
                .sum();
            (lhs - 0.5 * mesh.triangle_area(t) * dot(gu, gv)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriBase;

    #[test]
    fn hat_gradients_sum_to_zero_and_reproduce_linears() {
        let mesh = TriMesh::equilateral(TriBase::Rhombus, 2.0, 2);
        let u: Vec<f64> = mesh
            .vertices
            .iter()
            .map(|x| 3.0 * x[0] - 2.0 * x[1] + 1.0)
            .collect();
        for t in 0..mesh.num_triangles() {
            let g = hat_gradients(&mesh, t);
            assert!((g[0][0] + g[1][0] + g[2][0]).abs() < 1e-14);
            let gu = gradient(&mesh, t, &u);
            assert!((gu[0] - 3.0).abs() < 1e-12 && (gu[1] + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loads_are_a_partition_of_unity() {
        let mesh = TriMesh::equilateral(TriBase::Triangle, 1.0, 3);
        let s = |x: Point| (3.0 * x[0]).sin() + x[1];
        let total: f64 = assemble_load(&mesh, &s).iter().sum();
        assert!((total - integrate(&mesh, &s)).abs() < 1e-14);
        let m: f64 = lumped_mass(&mesh).iter().sum();
        assert!((m - mesh.area()).abs() < 1e-14);
        assert!(mean_corrected_load(&mesh, &s).iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn xx_identity_on_reference_triangle() {
        let mesh = TriMesh::equilateral(TriBase::Triangle, 1.0, 0);
        let x: Vec<f64> = mesh.vertices.iter().map(|p| p[0]).collect();
        assert!(xx_identity_deviation(&mesh, &x, &x) < 1e-15);
        let a = assemble_xx(&mesh, &[0.0; 3], 1.0);
        // 2 int grad x . (X (x) X) grad x = |T| for r = 1
        let ax = a.mul_vec(&x);
        let val: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        assert!((val - mesh.area()).abs() < 1e-15);
    }

    #[test]
    fn xx_form_with_triangle_constant_c_is_plain_stiffness() {
        let mesh = TriMesh::equilateral(TriBase::Rhombus, 1.0, 2);
        let ce = vec![1.7; mesh.num_edges()];
        let zc = vec![1.7; mesh.num_triangles()];
        let d = assemble_xx(&mesh, &ce, 0.2)
            .add_scaled(-1.0, &assemble_plain(&mesh, &zc, 0.2))
            .unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn zero_conductance_and_source_give_zero_energy() {
        let mesh = TriMesh::equilateral(TriBase::Triangle, 1.0, 2);
        let met = Metabolic {
            nu: 1.0,
            gamma: 2.0,
        };
        let load = vec![0.0; mesh.num_vertices()];
        let e = semidiscrete_energy(
            &mesh,
            &SemiDiscreteField::PerDiamond(vec![0.0; mesh.num_edges()]),
            &load,
            0.5,
            &met,
        )
        .unwrap();
        assert_eq!(e.energy(), 0.0);
    }
}
