//! Finite-element gradient-flow solver for the biological transport network
//! model: a weighted Poisson equation for the potential coupled to a
//! relaxation ODE for the conductance.
//!
//! For metabolic exponents `gamma < 1` the flow forms network patterns; for
//! `gamma > 1` its steady states solve the p-Laplacian with
//! `p = 2 gamma / (gamma - 1)`, so integrating to steady state is a relaxation
//! solver for that equation. The [`discrete`] module holds the graph model on
//! equilateral triangulations and checks of its continuum link.

pub mod discrete;
pub mod error;
pub mod fem;
pub mod gradientflow;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod plaplacian;

pub use error::{Error, Result};
