use serde::{Deserialize, Serialize};

use super::p1;
use crate::error::{Error, Result};
use crate::linalg::{krylov_solve, CsrMatrix, KrylovConfig, PreconditionerKind};
use crate::mesh::{Point, TriMesh};

pub(crate) const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Metabolic cost `(nu / gamma) C^gamma` of an edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metabolic {
    pub nu: f64,
    pub gamma: f64,
}

impl Metabolic {
    pub fn cost(&self, c: f64) -> f64 {
        self.nu / self.gamma * c.max(0.0).powf(self.gamma)
    }
}

/// How edge conductances enter the Kirchhoff law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeWeighting {
    /// Every edge as in the plain graph law.
    Uniform,
    /// Edges weighted by their diamond area relative to an interior diamond
    /// (boundary edges count one half). This is the law the P1 solution with
    /// diamond-wise conductance satisfies exactly.
    #[default]
    DiamondVolume,
}

/// Conductance network on an equilateral triangulation.
#[derive(Clone, Debug)]
pub struct TriGraph {
    pub mesh: TriMesh,
    /// One value per undirected edge.
    pub conductance: Vec<f64>,
    /// One value per vertex, summing to zero.
    pub source: Vec<f64>,
    pub r: f64,
}

impl TriGraph {
    pub fn new(mesh: TriMesh, conductance: Vec<f64>, source: Vec<f64>, r: f64) -> Result<Self> {
        if conductance.len() != mesh.num_edges() {
            return Err(Error::DimensionMismatch(format!(
                "{} conductances for {} edges",
                conductance.len(),
                mesh.num_edges()
            )));
        }
        if source.len() != mesh.num_vertices() {
            return Err(Error::DimensionMismatch(format!(
                "{} sources for {} vertices",
                source.len(),
                mesh.num_vertices()
            )));
        }
        if let Some(c) = conductance.iter().find(|c| !(**c >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "conductances must be nonnegative, got {c}"
            )));
        }
        if !(r >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "r must be nonnegative, got {r}"
            )));
        }
        let imbalance: f64 = source.iter().sum();
        let scale = source.iter().map(|s| s.abs()).sum::<f64>().max(1.0);
        if imbalance.abs() > 1e-12 * scale {
            return Err(Error::IncompatibleSource { imbalance });
        }
        Ok(Self {
            mesh,
            conductance,
            source,
            r,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.mesh.num_edges()
    }

    pub fn edge_weights(&self, weighting: EdgeWeighting) -> Vec<f64> {
        match weighting {
            EdgeWeighting::Uniform => vec![1.0; self.num_edges()],
            EdgeWeighting::DiamondVolume => {
                let vol = self.mesh.interior_diamond_area();
                self.mesh.diamond_areas().iter().map(|a| a / vol).collect()
            }
        }
    }

    /// Matrix of `U -> -sum_j w_ij (C_ij + r)(U_j - U_i)/h`.
    pub fn laplacian(&self, weighting: EdgeWeighting) -> CsrMatrix {
        let w = self.edge_weights(weighting);
        let h = self.mesh.h;
        let mut trip = Vec::with_capacity(4 * self.num_edges());
        for (e, &[a, b]) in self.mesh.edges.iter().enumerate() {
            let k = w[e] * (self.conductance[e] + self.r) / h;
            trip.extend([(a, a, k), (b, b, k), (a, b, -k), (b, a, -k)]);
        }
        CsrMatrix::from_triplets(self.mesh.num_vertices(), self.mesh.num_vertices(), &trip)
            .into_symmetric()
            .expect("graph Laplacian is symmetric by construction")
    }

    /// Zero-mean potentials satisfying the Kirchhoff law.
    pub fn kirchhoff_solve(&self, weighting: EdgeWeighting) -> Result<Vec<f64>> {
        let l = self.laplacian(weighting);
        let cfg = KrylovConfig {
            rtol: 1e-14,
            atol: 1e-15,
            max_iters: 20 * self.mesh.num_vertices() + 100,
            preconditioner: PreconditionerKind::IncompleteCholesky0,
            ..KrylovConfig::default()
        };
        Ok(krylov_solve(&l, &self.source, &cfg, true)?.0)
    }

    /// Largest absolute Kirchhoff residual of `u`.
    pub fn kirchhoff_residual(&self, weighting: EdgeWeighting, u: &[f64]) -> f64 {
        let lu = self.laplacian(weighting).mul_vec(u);
        lu.iter()
            .zip(&self.source)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `((U_a - U_b) / h)^2` per edge.
    pub fn edge_gradients(&self, u: &[f64]) -> Vec<f64> {
        let h = self.mesh.h;
        self.mesh
            .edges
            .iter()
            .map(|&[a, b]| ((u[a] - u[b]) / h).powi(2))
            .collect()
    }

    /// `h sum_edges (C + r) ((U_j - U_i)/h)^2 + (nu/gamma) C^gamma`.
    pub fn discrete_energy(&self, u: &[f64], met: &Metabolic) -> f64 {
        let g = self.edge_gradients(u);
        let sum: f64 = self
            .conductance
            .iter()
            .zip(&g)
            .map(|(&c, g)| (c + self.r) * g + met.cost(c))
            .sum();
        self.mesh.h * sum
    }

    /// `sum_edges vol(diamond) [2 (C + r) ((U_i - U_j)/h)^2 + (nu/gamma) C^gamma]`,
    /// with each edge's own diamond area.
    pub fn rescaled_energy(&self, u: &[f64], met: &Metabolic) -> f64 {
        let g = self.edge_gradients(u);
        let vol = self.mesh.diamond_areas();
        (0..self.num_edges())
            .map(|e| {
                let c = self.conductance[e];
                vol[e] * (2.0 * (c + self.r) * g[e] + met.cost(c))
            })
            .sum()
    }

    /// The same sum split into interior and boundary edges.
    pub fn rescaled_energy_parts(&self, u: &[f64], met: &Metabolic) -> (f64, f64) {
        let g = self.edge_gradients(u);
        let mut parts = (0.0, 0.0);
        for e in 0..self.num_edges() {
            let d = self.mesh.diamond(e);
            let c = self.conductance[e];
            let v = d.area * (2.0 * (c + self.r) * g[e] + met.cost(c));
            if d.boundary {
                parts.1 += v;
            } else {
                parts.0 += v;
            }
        }
        parts
    }

    /// Finite-element load `int S psi_i` matching this graph's sources,
    /// `S_i h / sqrt(3)`.
    pub fn fem_load(&self) -> Vec<f64> {
        let f = self.mesh.h / SQRT3;
        self.source.iter().map(|s| s * f).collect()
    }

    /// Edge list: `a,b,xa,ya,xb,yb,C`.
    pub fn write_edge_list<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["a", "b", "xa", "ya", "xb", "yb", "C"])?;
        for (e, &[a, b]) in self.mesh.edges.iter().enumerate() {
            let (pa, pb) = (self.mesh.vertices[a], self.mesh.vertices[b]);
            w.write_record(&[
                a.to_string(),
                b.to_string(),
                format!("{:e}", pa[0]),
                format!("{:e}", pa[1]),
                format!("{:e}", pb[0]),
                format!("{:e}", pb[1]),
                format!("{:e}", self.conductance[e]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `S_i = (sqrt(3) / h) int S psi_i`, the sources of the rescaled Kirchhoff law.
pub fn project_sources(mesh: &TriMesh, s: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let f = SQRT3 / mesh.h;
    p1::assemble_load(mesh, s).iter().map(|v| v * f).collect()
}

/// `(sum_i S_i^2, int S^2)` for checking a bound `sum_i S_i^2 <= K int S^2`.
pub fn source_bound_terms(mesh: &TriMesh, s: &dyn Fn(Point) -> f64) -> (f64, f64) {
    let si = project_sources(mesh, s);
    let lhs = si.iter().map(|v| v * v).sum();
    (lhs, p1::integrate(mesh, &|x| s(x).powi(2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriBase;

    #[test]
    fn single_triangle_kirchhoff() {
        let mesh = TriMesh::equilateral(TriBase::Triangle, 1.0, 0);
        let g = TriGraph::new(mesh, vec![0.0; 3], vec![1.0, -1.0, 0.0], 1.0).unwrap();
        // all three edges are boundary edges, so both weightings scale alike
        let u = g.kirchhoff_solve(EdgeWeighting::Uniform).unwrap();
        for (a, b) in u.iter().zip([1.0 / 3.0, -1.0 / 3.0, 0.0]) {
            assert!((a - b).abs() < 1e-13, "{u:?}");
        }
        assert!(g.kirchhoff_residual(EdgeWeighting::Uniform, &u) < 1e-13);
    }

    #[test]
    fn laplacian_kernel() {
        let mesh = TriMesh::equilateral(TriBase::Rhombus, 1.0, 2);
        let n = mesh.num_edges();
        let c: Vec<f64> = (0..n).map(|e| (e % 5) as f64 * 0.3).collect();
        let nv = mesh.num_vertices();
        let g = TriGraph::new(mesh, c, vec![0.0; nv], 0.1).unwrap();
        for w in [EdgeWeighting::Uniform, EdgeWeighting::DiamondVolume] {
            let l = g.laplacian(w);
            assert!(l.is_exactly_symmetric());
            assert!(l.mul_vec(&vec![1.0; nv]).iter().all(|v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn zero_source_gives_zero_potential() {
        let mesh = TriMesh::equilateral(TriBase::Triangle, 1.0, 2);
        let (ne, nv) = (mesh.num_edges(), mesh.num_vertices());
        let g = TriGraph::new(mesh, vec![1.0; ne], vec![0.0; nv], 0.0).unwrap();
        assert!(g
            .kirchhoff_solve(EdgeWeighting::DiamondVolume)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_unbalanced_sources() {
        let mesh = TriMesh::equilateral(TriBase::Triangle, 1.0, 0);
        let e = TriGraph::new(mesh, vec![1.0; 3], vec![1.0, 0.0, 0.0], 0.0).unwrap_err();
        assert!(matches!(e, Error::IncompatibleSource { imbalance } if imbalance == 1.0));
    }

    #[test]
    fn energies_without_flow() {
        let mesh = TriMesh::equilateral(TriBase::Rhombus, 1.0, 1);
        let (ne, nv) = (mesh.num_edges(), mesh.num_vertices());
        let kappa = 2.0;
        let g = TriGraph::new(mesh, vec![kappa; ne], vec![0.0; nv], 0.5).unwrap();
        let met = Metabolic {
            nu: 0.3,
            gamma: 1.5,
        };
        let u = vec![0.0; nv];
        let vol: f64 = g.mesh.diamond_areas().iter().sum();
        let expect = vol * met.cost(kappa);
        assert!((g.rescaled_energy(&u, &met) - expect).abs() < 1e-14);
        // the diamonds tile the domain
        assert!((vol - g.mesh.area()).abs() < 1e-14);
        assert!(
            (g.discrete_energy(&u, &met) - g.mesh.h * ne as f64 * met.cost(kappa)).abs() < 1e-14
        );
    }
}
