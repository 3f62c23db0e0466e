//! Output files.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use crate::error::Result;
use crate::mesh::vtk::Scalars;
use crate::mesh::{QuadMesh, TriMesh};

/// Buffered writer to `path`, creating missing parent directories.
pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `log10(max(v, floor))`, for plotting fields that reach zero.
pub fn log10_floored(v: &[f64], floor: f64) -> Vec<f64> {
    v.iter().map(|x| x.max(floor).log10()).collect()
}

pub fn write_quad_vtk(
    path: &Path,
    mesh: &QuadMesh,
    title: &str,
    points: &[Scalars],
    cells: &[Scalars],
) -> Result<()> {
    let mut w = create(path)?;
    mesh.write_vtk(&mut w, title, points, cells)
}

pub fn write_tri_vtk(
    path: &Path,
    mesh: &TriMesh,
    title: &str,
    points: &[Scalars],
    cells: &[Scalars],
) -> Result<()> {
    let mut w = create(path)?;
    mesh.write_vtk(&mut w, title, points, cells)
}
