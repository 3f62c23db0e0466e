use serde::{Deserialize, Serialize};

use super::problem::{PotentialData, Problem};
use crate::error::Result;
use crate::fem::ModelParams;
use crate::mesh::{BoundaryKind, Point, QuadMesh};

/// Network formation on the unit square: a Gaussian point source with its
/// mean removed, insulated boundary and constant initial conductance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFormation {
    /// Cells per side.
    pub n: usize,
    pub params: ModelParams,
    pub source_center: Point,
    /// `k` in `exp(-k |x - x0|^2)`.
    pub source_sharpness: f64,
    pub c0: f64,
    pub t_max: f64,
}

impl Default for NetworkFormation {
    /// Desk-scale run: 64 x 64 cells up to `t = 50`.
    fn default() -> Self {
        Self {
            n: 64,
            params: ModelParams {
                r: 1e-4,
                nu: 0.05,
                gamma: 0.75,
                eps: 1e-3,
            },
            source_center: [0.25, 0.25],
            source_sharpness: 500.0,
            c0: 1.0,
            t_max: 50.0,
        }
    }
}

impl NetworkFormation {
    /// 512 x 512 cells up to `t = 200`.
    pub fn full_scale() -> Self {
        Self {
            n: 512,
            t_max: 200.0,
            ..Self::default()
        }
    }

    pub fn source(&self) -> impl Fn(Point) -> f64 + Send + Sync + 'static {
        let (x0, k) = (self.source_center, self.source_sharpness);
        move |x: Point| (-k * ((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2))).exp()
    }

    pub fn mesh(&self) -> Result<QuadMesh> {
        Ok(QuadMesh::unit_square(self.n)?.with_uniform_boundary(BoundaryKind::Neumann))
    }

    /// The discrete problem; `mean_correct = false` reproduces the
    /// incompatible-source refusal.
    pub fn problem_with(&self, mean_correct: bool) -> Result<Problem> {
        let mut data = PotentialData::source_only(self.source());
        data.mean_correct_source = mean_correct;
        Problem::new(self.mesh()?, self.params, data)
    }

    pub fn problem(&self) -> Result<Problem> {
        self.problem_with(true)
    }
}
