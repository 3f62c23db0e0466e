//! Equilateral triangulations built by repeated midpoint refinement.

use std::collections::HashMap;

use super::quad::Point;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Shape of the coarsest triangulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TriBase {
    /// One equilateral triangle with side `h0`.
    Triangle,
    /// Two triangles sharing an edge (60/120 degree rhombus).
    Rhombus,
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Undirected edges `(a, b)` with `a < b`.
    pub edges: Vec<[usize; 2]>,
    /// Edges of each triangle, `triangle_edges[t][k]` joins local vertices `k` and `k+1`.
    pub triangle_edges: Vec<[usize; 3]>,
    /// One or two adjacent triangles per edge.
    pub edge_to_triangles: Vec<Vec<usize>>,
    pub h: f64,
}

/// Area of the region of an edge's neighbourhood inside the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Diamond {
    pub area: f64,
    /// Adjacent triangles; each contributes one third of its area.
    pub halves: Vec<usize>,
    /// Boundary edges only have the half-diamond inside the domain.
    pub boundary: bool,
}

impl TriMesh {
    pub fn equilateral(base: TriBase, h0: f64, refinements: usize) -> Self {
        let top = [0.5 * h0, 0.5 * SQRT3 * h0];
        let (vertices, triangles) = match base {
            TriBase::Triangle => (vec![[0.0, 0.0], [h0, 0.0], top], vec![[0, 1, 2]]),
            TriBase::Rhombus => (
                vec![[0.0, 0.0], [h0, 0.0], top, [1.5 * h0, 0.5 * SQRT3 * h0]],
                vec![[0, 1, 2], [1, 3, 2]],
            ),
        };
        let mut mesh = Self::from_triangles(vertices, triangles, h0);
        for _ in 0..refinements {
            mesh = mesh.refine();
        }
        mesh
    }

    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, h: f64) -> Self {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_to_triangles: Vec<Vec<usize>> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_to_triangles.push(Vec::with_capacity(2));
                    edges.len() - 1
                });
                edge_to_triangles[e].push(t);
                te[k] = e;
            }
            triangle_edges.push(te);
        }
        Self {
            vertices,
            triangles,
            edges,
            triangle_edges,
            edge_to_triangles,
            h,
        }
    }

    /// Splits each triangle into four by its edge midpoints.
    pub fn refine(&self) -> Self {
        let mut vertices = self.vertices.clone();
        let mut mids = vec![usize::MAX; self.edges.len()];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            mids[e] = vertices.len() - 1;
        }
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[v0, v1, v2]) in self.triangles.iter().enumerate() {
            let [e01, e12, e20] = self.triangle_edges[t];
            let (m01, m12, m20) = (mids[e01], mids[e12], mids[e20]);
            triangles.push([v0, m01, m20]);
            triangles.push([m01, v1, m12]);
            triangles.push([m20, m12, v2]);
            triangles.push([m01, m12, m20]);
        }
        Self::from_triangles(vertices, triangles, 0.5 * self.h)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_to_triangles[e].len() == 1
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Unit vector along the edge, from its larger to its smaller vertex index.
    pub fn edge_direction(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let l = self.edge_length(e);
        [(pa[0] - pb[0]) / l, (pa[1] - pb[1]) / l]
    }

    /// Interior diamond area `sqrt(3) h^2 / 6`.
    pub fn interior_diamond_area(&self) -> f64 {
        SQRT3 * self.h * self.h / 6.0
    }

    /// Nearest-edge region of `e`: one third of each adjacent triangle.
    pub fn diamond(&self, e: usize) -> Diamond {
        let halves = self.edge_to_triangles[e].clone();
        let area = halves.iter().map(|&t| self.triangle_area(t) / 3.0).sum();
        Diamond {
            area,
            boundary: halves.len() == 1,
            halves,
        }
    }

    pub fn diamond_areas(&self) -> Vec<f64> {
        (0..self.num_edges())
            .map(|e| self.diamond(e).area)
            .collect()
    }

    /// Adjacent vertices of every vertex.
    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.num_vertices()];
        for &[a, b] in &self.edges {
            nb[a].push(b);
            nb[b].push(a);
        }
        nb
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_and_first_refinement_counts() {
        let m = TriMesh::equilateral(TriBase::Triangle, 1.0, 0);
        assert_eq!(
            (m.num_triangles(), m.num_edges(), m.num_vertices()),
            (1, 3, 3)
        );
        let m = TriMesh::equilateral(TriBase::Triangle, 1.0, 1);
        assert_eq!(
            (m.num_triangles(), m.num_edges(), m.num_vertices()),
            (4, 9, 6)
        );
    }

    #[test]
    fn refinement_scales_counts_and_h() {
        for base in [TriBase::Triangle, TriBase::Rhombus] {
            let t0 = TriMesh::equilateral(base, 1.0, 0).num_triangles();
            for n in 0..6 {
                let m = TriMesh::equilateral(base, 1.0, n);
                assert_eq!(m.num_triangles(), t0 * 4usize.pow(n as u32));
                assert_eq!(m.h, 2f64.powi(-(n as i32)));
                // Euler characteristic of a disk
                let chi = m.num_vertices() as i64 - m.num_edges() as i64 + m.num_triangles() as i64;
                assert_eq!(chi, 1);
            }
        }
    }

    #[test]
    fn all_edges_equilateral_and_adjacency() {
        let m = TriMesh::equilateral(TriBase::Rhombus, 1.0, 4);
        for e in 0..m.num_edges() {
            assert!((m.edge_length(e) - m.h).abs() <= 1e-12 * m.h);
            let n = m.edge_to_triangles[e].len();
            assert!(n == 1 || n == 2);
        }
        for t in 0..m.num_triangles() {
            assert!(m.triangle_area(t) > 0.0);
        }
    }

    #[test]
    fn diamond_areas() {
        let m = TriMesh::equilateral(TriBase::Rhombus, 1.0, 1);
        let interior = (0..m.num_edges())
            .find(|&e| !m.is_boundary_edge(e))
            .unwrap();
        let boundary = (0..m.num_edges()).find(|&e| m.is_boundary_edge(e)).unwrap();
        // h = 1/2 here
        assert!((m.diamond(interior).area - SQRT3 / 24.0).abs() < 1e-15);
        assert!((m.diamond(boundary).area - SQRT3 / 48.0).abs() < 1e-15);
        assert!(m.diamond(boundary).boundary);

        let m = TriMesh::equilateral(TriBase::Rhombus, 1.0, 0);
        let interior = (0..m.num_edges())
            .find(|&e| !m.is_boundary_edge(e))
            .unwrap();
        let d = m.diamond(interior);
        assert!((d.area - SQRT3 / 6.0).abs() < 1e-15);
        assert!((d.area - m.interior_diamond_area()).abs() < 1e-15);
        assert!((m.h / (2.0 * d.area) - SQRT3).abs() < 1e-14);
    }

    #[test]
    fn diamonds_tile_the_domain() {
        for n in 0..5 {
            let m = TriMesh::equilateral(TriBase::Rhombus, 1.0, n);
            let total: f64 = m.diamond_areas().iter().sum();
            assert!((total - m.area()).abs() <= 1e-12 * m.area());
        }
    }
}
