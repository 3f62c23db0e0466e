//! Legacy ASCII VTK export (`UNSTRUCTURED_GRID`).

use std::io::Write;

use super::quad::{Point, QuadMesh};
use super::tri::TriMesh;
use crate::error::{Error, Result};

const VTK_TRIANGLE: u8 = 5;
const VTK_QUAD: u8 = 9;

/// A named scalar array attached to points or cells.
pub struct Scalars<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

impl<'a> Scalars<'a> {
    pub fn new(name: &'a str, values: &'a [f64]) -> Self {
        Self { name, values }
    }
}

fn write_grid<W: Write, const N: usize>(
    out: &mut W,
    title: &str,
    points: &[Point],
    cells: &[[usize; N]],
    cell_type: u8,
    point_data: &[Scalars],
    cell_data: &[Scalars],
) -> Result<()> {
    for s in point_data {
        if s.values.len() != points.len() {
            return Err(Error::DimensionMismatch(format!(
                "point field {} has {} values for {} points",
                s.name,
                s.values.len(),
                points.len()
            )));
        }
    }
    for s in cell_data {
        if s.values.len() != cells.len() {
            return Err(Error::DimensionMismatch(format!(
                "cell field {} has {} values for {} cells",
                s.name,
                s.values.len(),
                cells.len()
            )));
        }
    }
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", points.len())?;
    for p in points {
        writeln!(out, "{:e} {:e} 0", p[0], p[1])?;
    }
    writeln!(out, "CELLS {} {}", cells.len(), cells.len() * (N + 1))?;
    for c in cells {
        write!(out, "{N}")?;
        for v in c {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {}", cells.len())?;
    for _ in cells {
        writeln!(out, "{cell_type}")?;
    }
    if !cell_data.is_empty() {
        writeln!(out, "CELL_DATA {}", cells.len())?;
        write_scalars(out, cell_data)?;
    }
    if !point_data.is_empty() {
        writeln!(out, "POINT_DATA {}", points.len())?;
        write_scalars(out, point_data)?;
    }
    Ok(())
}

fn write_scalars<W: Write>(out: &mut W, fields: &[Scalars]) -> Result<()> {
    for s in fields {
        let name: String = s
            .name
            .chars()
            .map(|c| if c.is_whitespace() { '_' } else { c })
            .collect();
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in s.values {
            writeln!(out, "{v:e}")?;
        }
    }
    Ok(())
}

impl QuadMesh {
    /// P0 fields go to `CELL_DATA`, Q1 fields to `POINT_DATA`.
    pub fn write_vtk<W: Write>(
        &self,
        out: &mut W,
        title: &str,
        point_data: &[Scalars],
        cell_data: &[Scalars],
    ) -> Result<()> {
        write_grid(
            out,
            title,
            &self.vertices,
            &self.cells,
            VTK_QUAD,
            point_data,
            cell_data,
        )
    }
}

impl TriMesh {
    pub fn write_vtk<W: Write>(
        &self,
        out: &mut W,
        title: &str,
        point_data: &[Scalars],
        cell_data: &[Scalars],
    ) -> Result<()> {
        write_grid(
            out,
            title,
            &self.vertices,
            &self.triangles,
            VTK_TRIANGLE,
            point_data,
            cell_data,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_layout() {
        let m = QuadMesh::unit_square(1).unwrap();
        let mut buf = Vec::new();
        let u = [0.0, 1.0, 2.0, 3.0];
        let c = [5.0];
        m.write_vtk(
            &mut buf,
            "test",
            &[Scalars::new("u", &u)],
            &[Scalars::new("c", &c)],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
        assert_eq!(lines[4], "POINTS 4 double");
        assert_eq!(lines[9], "CELLS 1 5");
        assert_eq!(lines[10], "4 0 1 3 2");
        assert_eq!(lines[12], "9");
        assert!(text.contains("CELL_DATA 1\nSCALARS c double 1\nLOOKUP_TABLE default\n5e0\n"));
        assert!(text.contains("POINT_DATA 4\nSCALARS u double 1"));
    }

    #[test]
    fn rejects_wrong_lengths() {
        let m = TriMesh::equilateral(crate::mesh::TriBase::Triangle, 1.0, 1);
        let bad = [1.0];
        let mut buf = Vec::new();
        assert!(m
            .write_vtk(&mut buf, "x", &[Scalars::new("u", &bad)], &[])
            .is_err());
    }
}
