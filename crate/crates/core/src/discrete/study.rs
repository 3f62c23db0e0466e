use std::io::Write;

use serde::{Deserialize, Serialize};

use super::fields::DiamondFields;
use super::graph::{EdgeWeighting, Metabolic, TriGraph, SQRT3};
use super::p1::{mean_corrected_load, semidiscrete_energy, SemiDiscreteField};
use crate::error::{Error, Result};
use crate::mesh::{Point, TriBase, TriMesh};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementConfig {
    pub base: TriBase,
    /// Side of the coarsest triangles.
    pub h0: f64,
    /// Refinement counts of the compared levels, increasing.
    pub levels: [usize; 2],
    /// Extra refinements of the reference level beyond the finest compared one.
    pub reference_offset: usize,
    pub r: f64,
    pub metabolic: Metabolic,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            base: TriBase::Rhombus,
            h0: 1.0,
            levels: [1, 5],
            reference_offset: 2,
            r: 0.1,
            metabolic: Metabolic {
                nu: 1.0,
                gamma: 1.5,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub refinements: usize,
    pub h: f64,
    pub triangles: usize,
    /// Diamond-weighted graph energy with `C_e = c(midpoint)`.
    pub energy_graph: f64,
    /// Semi-discrete energy of the triangle averages.
    pub energy_z: f64,
    pub energy_ref: f64,
}

impl RefinementRow {
    pub fn gap_graph(&self) -> f64 {
        (self.energy_graph - self.energy_ref).abs()
    }

    pub fn gap_z(&self) -> f64 {
        (self.energy_z - self.energy_ref).abs()
    }
}

/// Graph and semi-discrete energies of `c` sampled on a refinement sequence,
/// compared against a P1 solve on a finer reference level. The source is
/// shifted to mean zero on every level.
pub fn refinement_study(
    c: &dyn Fn(Point) -> f64,
    s: &dyn Fn(Point) -> f64,
    cfg: &RefinementConfig,
) -> Result<Vec<RefinementRow>> {
    let [lo, hi] = cfg.levels;
    if hi < lo + 1 {
        return Err(Error::InvalidParameter(
            "a refinement study needs at least 2 levels".into(),
        ));
    }
    let met = cfg.metabolic;
    let ref_mesh = TriMesh::equilateral(cfg.base, cfg.h0, hi + cfg.reference_offset);
    let energy_ref = {
        let ct: Vec<f64> = (0..ref_mesh.num_triangles())
            .map(|t| c(centroid(&ref_mesh, t)).max(0.0))
            .collect();
        let load = mean_corrected_load(&ref_mesh, s);
        semidiscrete_energy(
            &ref_mesh,
            &SemiDiscreteField::PerTriangle(ct),
            &load,
            cfg.r,
            &met,
        )?
        .energy()
    };
    let mut rows = Vec::new();
    let mut mesh = TriMesh::equilateral(cfg.base, cfg.h0, lo);
    for k in lo..=hi {
        let ce: Vec<f64> = (0..mesh.num_edges())
            .map(|e| c(mesh.edge_midpoint(e)).max(0.0))
            .collect();
        let load = mean_corrected_load(&mesh, s);
        let z = DiamondFields::new(&mesh, &ce).z;
        let energy_z = semidiscrete_energy(
            &mesh,
            &SemiDiscreteField::PerTriangle(z),
            &load,
            cfg.r,
            &met,
        )?
        .energy();
        let si: Vec<f64> = load.iter().map(|b| b * SQRT3 / mesh.h).collect();
        let next = mesh.refine();
        let graph = TriGraph::new(mesh, ce, si, cfg.r)?;
        let u = graph.kirchhoff_solve(EdgeWeighting::DiamondVolume)?;
        rows.push(RefinementRow {
            refinements: k,
            h: graph.mesh.h,
            triangles: graph.mesh.num_triangles(),
            energy_graph: graph.rescaled_energy(&u, &met),
            energy_z,
            energy_ref,
        });
        mesh = next;
    }
    Ok(rows)
}

fn centroid(mesh: &TriMesh, t: usize) -> Point {
    let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

/// `refinements,h,triangles,E_graph,E_Z,E_ref,gap_graph,gap_Z`.
pub fn write_refinement_csv<W: Write>(rows: &[RefinementRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "refinements",
        "h",
        "triangles",
        "E_graph",
        "E_Z",
        "E_ref",
        "gap_graph",
        "gap_Z",
    ])?;
    for r in rows {
        w.write_record(&[
            r.refinements.to_string(),
            format!("{:e}", r.h),
            r.triangles.to_string(),
            format!("{:e}", r.energy_graph),
            format!("{:e}", r.energy_z),
            format!("{:e}", r.energy_ref),
            format!("{:e}", r.gap_graph()),
            format!("{:e}", r.gap_z()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
