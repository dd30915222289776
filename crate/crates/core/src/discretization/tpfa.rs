use super::{BoundarySpec, Scheme, SparseSystem};
use crate::error::{Error, Result};
use crate::fields::TensorField;
use crate::geometry::{dot, sub, Grid};

/// `t = a·(K d)/|d|²` with `a` the face area vector pointing out of `cell`
/// and `d` the vector from the cell centroid to the face centroid.
pub fn half_transmissibility(grid: &Grid, field: &TensorField, cell: usize, face: usize) -> f64 {
    let f = grid.face(face);
    let mut a = f.area;
    if f.owner != cell {
        a = [-a[0], -a[1], -a[2]];
    }
    let d = sub(f.centroid, grid.centroid(cell));
    dot(a, field.tensor(cell).apply(d)) / dot(d, d)
}

pub fn assemble_tpfa(grid: &Grid, field: &TensorField, bc: &BoundarySpec) -> Result<SparseSystem> {
    check_field(grid, field)?;
    let dirichlet = bc.resolve(grid)?;
    let n = grid.num_cells();
    let mut triplets = Vec::with_capacity(5 * n);
    let mut rhs = vec![0.0; n];
    for (fi, face) in grid.faces().iter().enumerate() {
        let ti = half_transmissibility(grid, field, face.owner, fi);
        if !(ti > 0.0) {
            return Err(Error::Assembly(format!(
                "face {fi}: non-positive half-transmissibility {ti:e} on cell {}",
                face.owner
            )));
        }
        match face.neighbor {
            Some(nb) => {
                let tj = half_transmissibility(grid, field, nb, fi);
                if !(tj > 0.0) {
                    return Err(Error::Assembly(format!(
                        "face {fi}: non-positive half-transmissibility {tj:e} on cell {nb}"
                    )));
                }
                let t = ti * tj / (ti + tj);
                let i = face.owner;
                triplets.push((i, i, t));
                triplets.push((i, nb, -t));
                triplets.push((nb, nb, t));
                triplets.push((nb, i, -t));
            }
            None => {
                if let Some(p) = dirichlet[fi] {
                    triplets.push((face.owner, face.owner, ti));
                    rhs[face.owner] += ti * p;
                }
            }
        }
    }
    let sys = SparseSystem::finish(grid, triplets, rhs, bc, &dirichlet, Scheme::Tpfa)?;
    debug_assert!(super::is_m_matrix(&sys.matrix, 1e-12));
    Ok(sys)
}

pub(crate) fn check_field(grid: &Grid, field: &TensorField) -> Result<()> {
    if field.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            context: "tensor field dimension",
            expected: grid.dim(),
            found: field.dim(),
        });
    }
    if !field.fits(grid.num_cells()) {
        return Err(Error::DimensionMismatch {
            context: "tensor field cells",
            expected: grid.num_cells(),
            found: field.len(),
        });
    }
    Ok(())
}
