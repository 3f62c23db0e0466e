//! Structured quadrilateral meshes: unit square and L-shape.
//!
//! Cells are stored counterclockwise. Boundary edges keep the orientation of
//! the cell they belong to, so the outward normal of edge `a -> b` is the
//! right-hand normal `(dy, -dx) / len`.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Which kind of boundary condition an edge carries for the potential.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub kind: BoundaryKind,
}

#[derive(Clone, Debug)]
pub struct QuadMesh {
    pub vertices: Vec<Point>,
    pub cells: Vec<[usize; 4]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Characteristic cell edge length.
    pub h: f64,
}

impl QuadMesh {
    /// `n x n` cells on `[0,1]^2`; every boundary edge is tagged Dirichlet.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("unit square needs n >= 1".into()));
        }
        let np = n + 1;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut cells = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let v0 = j * np + i;
                cells.push([v0, v0 + 1, v0 + np + 1, v0 + np]);
            }
        }
        Ok(Self::from_cells(vertices, cells, h))
    }

    /// L-shaped domain `(-1,1)^2 \ [0,1) x (-1,0]` with `n` cells per unit side.
    ///
    /// Built from three axis-aligned unit blocks; shared vertices are merged on
    /// the integer lattice before scaling by `1/n`.
    pub fn lshape(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("L-shape needs n >= 1".into()));
        }
        let n_i = n as i64;
        let h = 1.0 / n as f64;
        // lower-left corners of the three blocks, in lattice units
        let blocks = [(-n_i, -n_i), (-n_i, 0), (0, 0)];
        let mut index: HashMap<(i64, i64), usize> = HashMap::new();
        let mut vertices = Vec::new();
        let mut vid = |i: i64, j: i64, vertices: &mut Vec<Point>| -> usize {
            *index.entry((i, j)).or_insert_with(|| {
                vertices.push([i as f64 * h, j as f64 * h]);
                vertices.len() - 1
            })
        };
        let mut cells = Vec::with_capacity(3 * n * n);
        for &(bx, by) in &blocks {
            for j in 0..n_i {
                for i in 0..n_i {
                    let (x, y) = (bx + i, by + j);
                    let v0 = vid(x, y, &mut vertices);
                    let v1 = vid(x + 1, y, &mut vertices);
                    let v2 = vid(x + 1, y + 1, &mut vertices);
                    let v3 = vid(x, y + 1, &mut vertices);
                    cells.push([v0, v1, v2, v3]);
                }
            }
        }
        Ok(Self::from_cells(vertices, cells, h))
    }

    /// Builds a mesh from counterclockwise cells; boundary edges are the cell
    /// edges that belong to exactly one cell, all tagged Dirichlet.
    pub fn from_cells(vertices: Vec<Point>, cells: Vec<[usize; 4]>, h: f64) -> Self {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for cell in &cells {
            for k in 0..4 {
                let (a, b) = (cell[k], cell[(k + 1) % 4]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut boundary_edges = Vec::new();
        for cell in &cells {
            for k in 0..4 {
                let (a, b) = (cell[k], cell[(k + 1) % 4]);
                if count[&(a.min(b), a.max(b))] == 1 {
                    boundary_edges.push(BoundaryEdge {
                        vertices: [a, b],
                        kind: BoundaryKind::Dirichlet,
                    });
                }
            }
        }
        Self {
            vertices,
            cells,
            boundary_edges,
            h,
        }
    }

    /// Re-tags every boundary edge by evaluating `kind` at its midpoint.
    pub fn with_boundary_kinds(mut self, kind: impl Fn(Point) -> BoundaryKind) -> Self {
        for i in 0..self.boundary_edges.len() {
            let m = self.edge_midpoint(i);
            self.boundary_edges[i].kind = kind(m);
        }
        self
    }

    pub fn with_uniform_boundary(self, kind: BoundaryKind) -> Self {
        self.with_boundary_kinds(|_| kind)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 4] {
        let c = &self.cells[cell];
        [
            self.vertices[c[0]],
            self.vertices[c[1]],
            self.vertices[c[2]],
            self.vertices[c[3]],
        ]
    }

    /// Exact area of a planar quadrilateral (shoelace).
    pub fn cell_area(&self, cell: usize) -> f64 {
        let p = self.cell_vertices(cell);
        let mut s = 0.0;
        for k in 0..4 {
            let (a, b) = (p[k], p[(k + 1) % 4]);
            s += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * s
    }

    pub fn cell_centroid(&self, cell: usize) -> Point {
        let p = self.cell_vertices(cell);
        [
            0.25 * (p[0][0] + p[1][0] + p[2][0] + p[3][0]),
            0.25 * (p[0][1] + p[1][1] + p[2][1] + p[3][1]),
        ]
    }

    pub fn area(&self) -> f64 {
        (0..self.num_cells()).map(|k| self.cell_area(k)).sum()
    }

    pub fn edge_midpoint(&self, boundary_edge: usize) -> Point {
        let [a, b] = self.boundary_edges[boundary_edge].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Outward unit normal and length of a boundary edge.
    pub fn edge_normal(&self, boundary_edge: usize) -> (Point, f64) {
        let [a, b] = self.boundary_edges[boundary_edge].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let len = (dx * dx + dy * dy).sqrt();
        ([dy / len, -dx / len], len)
    }

    /// Vertices touched by a Dirichlet edge.
    pub fn dirichlet_vertices(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_vertices()];
        for e in &self.boundary_edges {
            if e.kind == BoundaryKind::Dirichlet {
                mask[e.vertices[0]] = true;
                mask[e.vertices[1]] = true;
            }
        }
        mask
    }

    pub fn is_pure_neumann(&self) -> bool {
        self.boundary_edges
            .iter()
            .all(|e| e.kind == BoundaryKind::Neumann)
    }

    /// Jacobian determinant of the bilinear map at each of the four corners.
    pub fn corner_jacobians(&self, cell: usize) -> [f64; 4] {
        let p = self.cell_vertices(cell);
        let mut out = [0.0; 4];
        for k in 0..4 {
            let prev = p[(k + 3) % 4];
            let cur = p[k];
            let next = p[(k + 1) % 4];
            let e1 = [next[0] - cur[0], next[1] - cur[1]];
            let e2 = [prev[0] - cur[0], prev[1] - cur[1]];
            out[k] = e1[0] * e2[1] - e1[1] * e2[0];
        }
        out
    }

    /// Uniform refinement: each cell splits into four, coarse vertices keep
    /// their indices and positions, boundary edges split and keep their tag.
    pub fn refine(&self) -> Self {
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (pa, pb) = (vertices[a], vertices[b]);
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                vertices.len() - 1
            })
        };
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for k in 0..self.cells.len() {
            let [v0, v1, v2, v3] = self.cells[k];
            let m01 = mid(v0, v1, &mut vertices);
            let m12 = mid(v1, v2, &mut vertices);
            let m23 = mid(v2, v3, &mut vertices);
            let m30 = mid(v3, v0, &mut vertices);
            let c = self.cell_centroid(k);
            vertices.push(c);
            let ci = vertices.len() - 1;
            cells.push([v0, m01, ci, m30]);
            cells.push([m01, v1, m12, ci]);
            cells.push([ci, m12, v2, m23]);
            cells.push([m30, ci, m23, v3]);
        }
        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        for e in &self.boundary_edges {
            let [a, b] = e.vertices;
            let m = mid(a, b, &mut vertices);
            boundary_edges.push(BoundaryEdge {
                vertices: [a, m],
                kind: e.kind,
            });
            boundary_edges.push(BoundaryEdge {
                vertices: [m, b],
                kind: e.kind,
            });
        }
        Self {
            vertices,
            cells,
            boundary_edges,
            h: 0.5 * self.h,
        }
    }
}

/// Dirichlet on the re-entrant edges `{0} x [-1,0]` and `[0,1] x {0}`, Neumann elsewhere.
pub fn lshape_reentrant_dirichlet(p: Point) -> BoundaryKind {
    let tol = 1e-12;
    let on_vertical = p[0].abs() < tol && p[1] <= tol;
    let on_horizontal = p[1].abs() < tol && p[0] >= -tol;
    if on_vertical || on_horizontal {
        BoundaryKind::Dirichlet
    } else {
        BoundaryKind::Neumann
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boundary_length(m: &QuadMesh) -> f64 {
        (0..m.boundary_edges.len())
            .map(|i| m.edge_normal(i).1)
            .sum()
    }

    #[test]
    fn unit_square_counts() {
        let m = QuadMesh::unit_square(1).unwrap();
        assert_eq!(
            (m.num_vertices(), m.num_cells(), m.boundary_edges.len()),
            (4, 1, 4)
        );
        let m = QuadMesh::unit_square(16).unwrap();
        assert_eq!((m.num_vertices(), m.num_cells()), (289, 256));
        assert_eq!(m.boundary_edges.len(), 64);
        assert_eq!(m.h, 1.0 / 16.0);
        assert!(QuadMesh::unit_square(0).is_err());
    }

    #[test]
    fn unit_square_512_matches_reported_size() {
        let m = QuadMesh::unit_square(512).unwrap();
        assert_eq!(m.num_vertices(), 513 * 513);
        assert_eq!(m.num_cells(), 262_144);
        assert_eq!(m.h, 1.0 / 512.0);
        // Q1 nodes plus P0 cells: about 263 thousand potential dofs, 262k conductances
        assert!(m.num_vertices() > 263_000 && m.num_vertices() < 264_000);
    }

    #[test]
    fn lshape_counts_and_area() {
        let m = QuadMesh::lshape(1).unwrap();
        assert_eq!((m.num_cells(), m.num_vertices()), (3, 8));
        assert_eq!(m.boundary_edges.len(), 8);
        for n in 1..6 {
            let m = QuadMesh::lshape(n).unwrap();
            assert_eq!(m.num_cells(), 3 * n * n);
            assert!((m.area() - 3.0).abs() < 1e-12);
            assert!((boundary_length(&m) - 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lshape_mixed_tags_partition_boundary() {
        let m = QuadMesh::lshape(4)
            .unwrap()
            .with_boundary_kinds(lshape_reentrant_dirichlet);
        let d: f64 = (0..m.boundary_edges.len())
            .filter(|&i| m.boundary_edges[i].kind == BoundaryKind::Dirichlet)
            .map(|i| m.edge_normal(i).1)
            .sum();
        let nn: f64 = (0..m.boundary_edges.len())
            .filter(|&i| m.boundary_edges[i].kind == BoundaryKind::Neumann)
            .map(|i| m.edge_normal(i).1)
            .sum();
        assert!((d - 2.0).abs() < 1e-12);
        assert!((nn - 6.0).abs() < 1e-12);
    }

    #[test]
    fn outward_normals_point_out() {
        let m = QuadMesh::lshape(2).unwrap();
        for i in 0..m.boundary_edges.len() {
            let (n, len) = m.edge_normal(i);
            let mp = m.edge_midpoint(i);
            let probe = [mp[0] + 1e-3 * n[0], mp[1] + 1e-3 * n[1]];
            let inside = probe[0] > -1.0
                && probe[0] < 1.0
                && probe[1] > -1.0
                && probe[1] < 1.0
                && !(probe[0] > 0.0 && probe[1] < 0.0);
            assert!(!inside, "normal of edge {i} points inward");
            assert!((len - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn cells_have_positive_corner_jacobians() {
        for m in [
            QuadMesh::unit_square(5).unwrap(),
            QuadMesh::lshape(3).unwrap(),
        ] {
            for k in 0..m.num_cells() {
                assert!(m.corner_jacobians(k).iter().all(|&j| j > 0.0));
            }
        }
    }

    #[test]
    fn refinement_preserves_coarse_vertices() {
        let coarse = QuadMesh::lshape(2)
            .unwrap()
            .with_boundary_kinds(lshape_reentrant_dirichlet);
        let fine = coarse.refine();
        assert_eq!(fine.num_cells(), 4 * coarse.num_cells());
        assert_eq!(fine.h, 0.5 * coarse.h);
        assert_eq!(
            &fine.vertices[..coarse.num_vertices()],
            &coarse.vertices[..]
        );
        assert!((fine.area() - 3.0).abs() < 1e-12);
        assert_eq!(fine.boundary_edges.len(), 2 * coarse.boundary_edges.len());
        let direct = QuadMesh::lshape(4).unwrap();
        assert_eq!(fine.num_vertices(), direct.num_vertices());
        for k in 0..fine.num_cells() {
            assert!(fine.corner_jacobians(k).iter().all(|&j| j > 0.0));
        }
        // tags survive refinement
        let retagged = fine.clone().with_boundary_kinds(lshape_reentrant_dirichlet);
        assert_eq!(retagged.boundary_edges, fine.boundary_edges);
    }
}
