use serde::{Deserialize, Serialize};

use super::graph::Metabolic;
use super::p1::{semidiscrete_energy, SemiDiscreteField};
use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};

/// Piecewise constant fields built from edge conductances.
#[derive(Clone, Debug, PartialEq)]
pub struct DiamondFields {
    /// Value on each edge's diamond.
    pub q: Vec<f64>,
    /// Mean of the three edge values on each triangle.
    pub z: Vec<f64>,
    /// Unit edge direction on each diamond.
    pub x: Vec<Point>,
    /// Largest difference between two edge values of a triangle.
    pub d: Vec<f64>,
}

impl DiamondFields {
    pub fn new(mesh: &TriMesh, c: &[f64]) -> Self {
        let (z, d) = mesh
            .triangle_edges
            .iter()
            .map(|te| {
                let v = te.map(|e| c[e]);
                let max = v[0].max(v[1]).max(v[2]);
                let min = v[0].min(v[1]).min(v[2]);
                ((v[0] + v[1] + v[2]) / 3.0, max - min)
            })
            .unzip();
        Self {
            q: c.to_vec(),
            z,
            x: (0..mesh.num_edges())
                .map(|e| mesh.edge_direction(e))
                .collect(),
            d,
        }
    }

    /// `sup |Q - Z|`, over every third of a triangle.
    pub fn qz_sup(&self, mesh: &TriMesh) -> f64 {
        mesh.triangle_edges
            .iter()
            .zip(&self.z)
            .flat_map(|(te, &z)| te.map(|e| (self.q[e] - z).abs()))
            .fold(0.0, f64::max)
    }

    pub fn max_d(&self) -> f64 {
        self.d.iter().cloned().fold(0.0, f64::max)
    }
}

/// `(||Q - Z||_inf, (2/3) max_T D(T))`.
pub fn qz_gap(mesh: &TriMesh, c: &[f64]) -> (f64, f64) {
    let f = DiamondFields::new(mesh, c);
    (f.qz_sup(mesh), 2.0 / 3.0 * f.max_d())
}

/// Semi-discrete energies at `Q_h[C]` and `Z_h[C]` and the bound on their gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyGap {
    pub energy_q: f64,
    pub energy_z: f64,
    pub gap: f64,
    pub qz_sup: f64,
    /// `||Q - Z||_inf (2 ||grad u_Q|| ||grad u_Z|| + |Omega| nu ||C||_inf^{gamma-1})`.
    pub bound: f64,
    /// The same with `||Q - Z||_inf` replaced by `(2/3) max D`.
    pub bound_d: f64,
}

impl EnergyGap {
    pub fn holds(&self) -> bool {
        self.gap <= self.bound * (1.0 + 1e-12) + 1e-14
            && self.bound <= self.bound_d * (1.0 + 1e-12) + 1e-14
    }
}

pub fn energy_gap(
    mesh: &TriMesh,
    c: &[f64],
    load: &[f64],
    r: f64,
    met: &Metabolic,
) -> Result<EnergyGap> {
    if !(met.gamma >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "energy gap bound needs gamma >= 1, got {}",
            met.gamma
        )));
    }
    let f = DiamondFields::new(mesh, c);
    let eq = semidiscrete_energy(
        mesh,
        &SemiDiscreteField::PerDiamond(f.q.clone()),
        load,
        r,
        met,
    )?;
    let ez = semidiscrete_energy(
        mesh,
        &SemiDiscreteField::PerTriangle(f.z.clone()),
        load,
        r,
        met,
    )?;
    let cmax = c.iter().cloned().fold(0.0, f64::max);
    let factor =
        2.0 * eq.grad_norm * ez.grad_norm + mesh.area() * met.nu * cmax.powf(met.gamma - 1.0);
    let qz = f.qz_sup(mesh);
    Ok(EnergyGap {
        energy_q: eq.energy(),
        energy_z: ez.energy(),
        gap: (eq.energy() - ez.energy()).abs(),
        qz_sup: qz,
        bound: qz * factor,
        bound_d: 2.0 / 3.0 * f.max_d() * factor,
    })
}
