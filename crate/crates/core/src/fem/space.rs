use super::quadrature::QuadratureRule;
use crate::linalg::CsrMatrix;
use crate::mesh::{Point, QuadMesh};

/// Reference corners in the local (counterclockwise) vertex order.
pub const REF_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

const NONE: usize = usize::MAX;

/// Values and reference gradients of the four bilinear shape functions.
pub fn q1_shape(xi: [f64; 2]) -> ([f64; 4], [[f64; 2]; 4]) {
    let mut phi = [0.0; 4];
    let mut dphi = [[0.0; 2]; 4];
    for (a, c) in REF_CORNERS.iter().enumerate() {
        let (sx, sy) = (1.0 + c[0] * xi[0], 1.0 + c[1] * xi[1]);
        phi[a] = 0.25 * sx * sy;
        dphi[a] = [0.25 * c[0] * sy, 0.25 * c[1] * sx];
    }
    (phi, dphi)
}

/// Shape data at one quadrature point of one cell.
#[derive(Clone, Copy, Debug)]
pub struct QPoint {
    pub x: Point,
    pub phi: [f64; 4],
    pub grad: [[f64; 2]; 4],
    /// Quadrature weight times the Jacobian determinant.
    pub jxw: f64,
}

/// Evaluates the bilinear map of `corners` at the points of `rule`.
pub fn map_cell(corners: &[Point; 4], rule: &QuadratureRule) -> Vec<QPoint> {
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(xi, w)| {
            let (phi, dref) = q1_shape(*xi);
            let mut x = [0.0; 2];
            let mut jac = [[0.0; 2]; 2];
            for a in 0..4 {
                for d in 0..2 {
                    x[d] += phi[a] * corners[a][d];
                    jac[d][0] += dref[a][0] * corners[a][d];
                    jac[d][1] += dref[a][1] * corners[a][d];
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            // grad = J^{-T} dref
            let mut grad = [[0.0; 2]; 4];
            for a in 0..4 {
                grad[a] = [
                    (jac[1][1] * dref[a][0] - jac[1][0] * dref[a][1]) / det,
                    (-jac[0][1] * dref[a][0] + jac[0][0] * dref[a][1]) / det,
                ];
            }
            QPoint {
                x,
                phi,
                grad,
                jxw: w * det,
            }
        })
        .collect()
}

/// Q1 potential space with P0 conductance on a quadrilateral mesh.
///
/// Vertices on Dirichlet edges are eliminated; the remaining free vertices
/// are numbered consecutively and index the rows of all assembled matrices.
#[derive(Clone, Debug)]
pub struct Q1Space {
    pub mesh: QuadMesh,
    /// 2x2 Gauss data per cell, four points each.
    qpoints: Vec<[QPoint; 4]>,
    areas: Vec<f64>,
    dirichlet: Vec<bool>,
    free_index: Vec<usize>,
    free_nodes: Vec<usize>,
    stiffness_pattern: CsrMatrix,
    stiffness_pos: Vec<[[usize; 4]; 4]>,
    coupling_pattern: CsrMatrix,
    coupling_pos: Vec<[usize; 4]>,
    /// Integral of each shape function, all vertices.
    basis_integrals: Vec<f64>,
}

impl Q1Space {
    pub fn new(mesh: QuadMesh) -> Self {
        let rule = QuadratureRule::gauss_quad(2);
        let mut qpoints = Vec::with_capacity(mesh.num_cells());
        let mut areas = Vec::with_capacity(mesh.num_cells());
        let mut basis_integrals = vec![0.0; mesh.num_vertices()];
        for k in 0..mesh.num_cells() {
            let qs = map_cell(&mesh.cell_vertices(k), &rule);
            areas.push(qs.iter().map(|q| q.jxw).sum());
            for q in &qs {
                for (a, &v) in mesh.cells[k].iter().enumerate() {
                    basis_integrals[v] += q.jxw * q.phi[a];
                }
            }
            qpoints.push([qs[0], qs[1], qs[2], qs[3]]);
        }
        let dirichlet = mesh.dirichlet_vertices();
        let mut free_index = vec![NONE; mesh.num_vertices()];
        let mut free_nodes = Vec::new();
        for (v, &d) in dirichlet.iter().enumerate() {
            if !d {
                free_index[v] = free_nodes.len();
                free_nodes.push(v);
            }
        }
        let nf = free_nodes.len();
        let mut trip = Vec::new();
        let mut btrip = Vec::new();
        for (k, cell) in mesh.cells.iter().enumerate() {
            for &va in cell {
                let ia = free_index[va];
                if ia == NONE {
                    continue;
                }
                btrip.push((ia, k, 0.0));
                for &vb in cell {
                    let ib = free_index[vb];
                    if ib != NONE {
                        trip.push((ia, ib, 0.0));
                    }
                }
            }
        }
        let stiffness_pattern = CsrMatrix::from_triplets(nf, nf, &trip).assume_symmetric();
        let coupling_pattern = CsrMatrix::from_triplets(nf, mesh.num_cells(), &btrip);
        let mut stiffness_pos = Vec::with_capacity(mesh.num_cells());
        let mut coupling_pos = Vec::with_capacity(mesh.num_cells());
        for (k, cell) in mesh.cells.iter().enumerate() {
            let mut sp = [[NONE; 4]; 4];
            let mut bp = [NONE; 4];
            for a in 0..4 {
                let ia = free_index[cell[a]];
                if ia == NONE {
                    continue;
                }
                bp[a] = coupling_pattern.find(ia, k).unwrap();
                for b in 0..4 {
                    let ib = free_index[cell[b]];
                    if ib != NONE {
                        sp[a][b] = stiffness_pattern.find(ia, ib).unwrap();
                    }
                }
            }
            stiffness_pos.push(sp);
            coupling_pos.push(bp);
        }
        Self {
            mesh,
            qpoints,
            areas,
            dirichlet,
            free_index,
            free_nodes,
            stiffness_pattern,
            stiffness_pos,
            coupling_pattern,
            coupling_pos,
            basis_integrals,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_cells()
    }

    pub fn num_free(&self) -> usize {
        self.free_nodes.len()
    }

    /// No Dirichlet vertices: the potential is determined up to a constant.
    pub fn is_pure_neumann(&self) -> bool {
        self.free_nodes.len() == self.num_nodes()
    }

    pub fn is_dirichlet(&self, v: usize) -> bool {
        self.dirichlet[v]
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    /// Free index of vertex `v`, if it is not a Dirichlet vertex.
    pub fn free_index(&self, v: usize) -> Option<usize> {
        let i = self.free_index[v];
        (i != NONE).then_some(i)
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn cell_nodes(&self, k: usize) -> &[usize; 4] {
        &self.mesh.cells[k]
    }

    pub fn qpoints(&self, k: usize) -> &[QPoint; 4] {
        &self.qpoints[k]
    }

    pub fn cell_area(&self, k: usize) -> f64 {
        self.areas[k]
    }

    pub fn cell_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn basis_integrals(&self) -> &[f64] {
        &self.basis_integrals
    }

    /// Shape data for an arbitrary rule, e.g. 3x3 Gauss for error norms.
    pub fn qpoints_with(&self, k: usize, rule: &QuadratureRule) -> Vec<QPoint> {
        map_cell(&self.mesh.cell_vertices(k), rule)
    }

    /// Gradient of the Q1 function with nodal values `u` at a quadrature point.
    pub fn grad_at(&self, k: usize, q: &QPoint, u: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (a, &v) in self.mesh.cells[k].iter().enumerate() {
            g[0] += u[v] * q.grad[a][0];
            g[1] += u[v] * q.grad[a][1];
        }
        g
    }

    pub fn value_at(&self, k: usize, q: &QPoint, u: &[f64]) -> f64 {
        self.mesh.cells[k]
            .iter()
            .enumerate()
            .map(|(a, &v)| u[v] * q.phi[a])
            .sum()
    }

    pub(crate) fn stiffness_pattern(&self) -> (&CsrMatrix, &[[[usize; 4]; 4]]) {
        (&self.stiffness_pattern, &self.stiffness_pos)
    }

    pub(crate) fn coupling_pattern(&self) -> (&CsrMatrix, &[[usize; 4]]) {
        (&self.coupling_pattern, &self.coupling_pos)
    }

    /// Restriction of a vertex vector to the free vertices.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_nodes.iter().map(|&v| full[v]).collect()
    }

    /// Adds a free-vertex vector into a vertex vector.
    pub fn add_free(&self, full: &mut [f64], free: &[f64], scale: f64) {
        for (&v, &x) in self.free_nodes.iter().zip(free) {
            full[v] += scale * x;
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.mesh.vertices.iter().map(|&x| f(x)).collect()
    }

    /// Sets Dirichlet vertices to `g` and leaves free vertices unchanged.
    pub fn apply_dirichlet(&self, u: &mut [f64], g: impl Fn(Point) -> f64) {
        for (v, &d) in self.dirichlet.iter().enumerate() {
            if d {
                u[v] = g(self.mesh.vertices[v]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryKind;

    #[test]
    fn shape_functions_partition_unity() {
        for xi in [[0.3, -0.7], [0.0, 0.0], [-1.0, 1.0]] {
            let (phi, d) = q1_shape(xi);
            assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let gx: f64 = d.iter().map(|g| g[0]).sum();
            let gy: f64 = d.iter().map(|g| g[1]).sum();
            assert!(gx.abs() < 1e-15 && gy.abs() < 1e-15);
        }
    }

    #[test]
    fn unit_cell_geometry() {
        let s = Q1Space::new(QuadMesh::unit_square(1).unwrap());
        assert_eq!(s.num_free(), 0);
        assert!((s.cell_area(0) - 1.0).abs() < 1e-15);
        for w in s.basis_integrals() {
            assert!((w - 0.25).abs() < 1e-15);
        }
        // u = xy has gradient (1/2, 1/2) at the centre
        let u = s.interpolate(|x| x[0] * x[1]);
        let q = map_cell(&s.mesh.cell_vertices(0), &QuadratureRule::gauss_quad(1));
        let g = s.grad_at(0, &q[0], &u);
        assert!((g[0] - 0.5).abs() < 1e-15 && (g[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn affine_gradients_reproduced() {
        let s = Q1Space::new(QuadMesh::lshape(3).unwrap());
        let u = s.interpolate(|x| 0.5 - 2.0 * x[0] + 3.0 * x[1]);
        for k in 0..s.num_cells() {
            for q in s.qpoints(k) {
                let g = s.grad_at(k, q, &u);
                assert!((g[0] + 2.0).abs() < 1e-12 && (g[1] - 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn free_numbering() {
        let m = QuadMesh::unit_square(4).unwrap();
        let s = Q1Space::new(m.clone());
        assert_eq!(s.num_free(), 9);
        let s = Q1Space::new(m.with_uniform_boundary(BoundaryKind::Neumann));
        assert!(s.is_pure_neumann());
        assert_eq!(s.free_index(7), Some(7));
    }
}
