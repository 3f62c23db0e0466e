//! Quadrilateral and equilateral-triangle meshes.

mod quad;
mod tri;
pub mod vtk;

pub use quad::{lshape_reentrant_dirichlet, BoundaryEdge, BoundaryKind, Point, QuadMesh};
pub use tri::{Diamond, TriBase, TriMesh};
