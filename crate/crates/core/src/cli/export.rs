//! Field exports: legacy VTK structured grid and plain CSV.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Grid;

/// Legacy ASCII VTK `STRUCTURED_GRID` with one cell scalar per field.
pub fn write_vtk(path: &Path, grid: &Grid, fields: &[(&str, &[f64])]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let body = |out: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        let nn = grid.node_counts();
        writeln!(out, "# vtk DataFile Version 3.0")?;
        writeln!(out, "pressure fields")?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET STRUCTURED_GRID")?;
        writeln!(out, "DIMENSIONS {} {} {}", nn[0], nn[1], nn[2])?;
        writeln!(out, "POINTS {} double", grid.num_nodes())?;
        for p in grid.nodes() {
            writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
        }
        writeln!(out, "CELL_DATA {}", grid.num_cells())?;
        for (name, values) in fields {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(out, "{v:.17e}")?;
            }
        }
        out.flush()
    };
    body(&mut out).map_err(|e| Error::io(path, e))
}

/// `cell,x,y[,z],<field>...` rows at cell centroids.
pub fn write_csv(path: &Path, grid: &Grid, fields: &[(&str, &[f64])]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let body = |out: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        let three = grid.dim() == 3;
        write!(out, "cell,x,y")?;
        if three {
            write!(out, ",z")?;
        }
        for (name, _) in fields {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for c in 0..grid.num_cells() {
            let x = grid.centroid(c);
            write!(out, "{c},{},{}", x[0], x[1])?;
            if three {
                write!(out, ",{}", x[2])?;
            }
            for (_, values) in fields {
                write!(out, ",{:.17e}", values[c])?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    body(&mut out).map_err(|e| Error::io(path, e))
}
