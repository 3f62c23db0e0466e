//! Q1 potential / P0 conductance finite elements on quadrilaterals.

mod assembly;
mod quadrature;
mod space;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use assembly::{
    apply_weighted_laplacian, assemble_a_diagonal, assemble_coupling, assemble_source,
    assemble_stiffness, assemble_stiffness_full, eval_gradients, local_conductance,
    metabolic_derivative, metabolic_rate, permeability, project_p0, project_p0_with, REG_FLOOR,
};
pub use quadrature::QuadratureRule;
pub use space::{map_cell, q1_shape, Q1Space, QPoint, REF_CORNERS};

/// Coefficients of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Background permeability.
    pub r: f64,
    /// Metabolic constant.
    pub nu: f64,
    /// Metabolic exponent.
    pub gamma: f64,
    /// Regularization of the metabolic term `(c^2 + eps)^{gamma/2}`.
    pub eps: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "r must be >= 0, got {}",
                self.r
            )));
        }
        if !(self.nu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nu must be > 0, got {}",
                self.nu
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must be >= 0, got {}",
                self.eps
            )));
        }
        Ok(())
    }

    /// p-Laplacian parameters for exponent `p > 2`: `gamma = p/(p-2)`, `r = eps = 0`, `nu = 1`.
    pub fn p_laplacian(p: f64) -> Result<Self> {
        if !(p > 2.0) {
            return Err(Error::InvalidParameter(format!("p must exceed 2, got {p}")));
        }
        Ok(Self {
            r: 0.0,
            nu: 1.0,
            gamma: p / (p - 2.0),
            eps: 0.0,
        })
    }

    /// The exponent `p = 2 gamma / (gamma - 1)` of the steady states, for `gamma > 1`.
    pub fn p(&self) -> Option<f64> {
        (self.gamma > 1.0).then(|| 2.0 * self.gamma / (self.gamma - 1.0))
    }
}
