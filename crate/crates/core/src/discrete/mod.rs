//! Graph model on equilateral triangulations.
//!
//! Edge conductances `C_ij` and vertex sources `S_i` define a Kirchhoff law
//! for vertex potentials. The module also builds the piecewise constant
//! fields that link the graph to linear finite elements (diamond values `Q`,
//! triangle averages `Z`, edge directions `X`), the semi-discrete energy, and
//! an edgewise conductance flow.

mod fields;
mod flow;
mod graph;
pub mod p1;
mod study;

pub use fields::{energy_gap, qz_gap, DiamondFields, EnergyGap};
pub use flow::{discrete_gradient_flow, FlowConfig, FlowRun, FlowStep};
pub use graph::{project_sources, source_bound_terms, EdgeWeighting, Metabolic, TriGraph};
pub use p1::{semidiscrete_energy, xx_identity_deviation, SemiDiscrete, SemiDiscreteField};
pub use study::{refinement_study, write_refinement_csv, RefinementConfig, RefinementRow};
