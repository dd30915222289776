//! MPFA-O on 2-D quadrilateral grids.
//!
//! One interaction region per grid node. Each cell around the node gets a
//! linear pressure reconstructed from its centroid value and the values at
//! the midpoints of its two edges meeting at the node. Half-edge fluxes are
//! made continuous across interior edges; on boundary edges the half-edge
//! pressure is prescribed (Dirichlet) or the half-edge flux vanishes.

use super::tpfa::check_field;
use super::{BoundarySpec, Scheme, SparseSystem};
use crate::error::{Error, Result};
use crate::fields::TensorField;
use crate::geometry::{sub, Grid};

pub fn assemble_mpfa_o(
    grid: &Grid,
    field: &TensorField,
    bc: &BoundarySpec,
) -> Result<SparseSystem> {
    if grid.dim() != 2 {
        return Err(Error::InvalidArgument(
            "MPFA-O assembly requires a 2-D grid".into(),
        ));
    }
    check_field(grid, field)?;
    let dirichlet = bc.resolve(grid)?;
    let n = grid.num_cells();

    let mut node_cells = vec![Vec::new(); grid.num_nodes()];
    for c in 0..n {
        for &v in grid.cell_nodes(c) {
            node_cells[v].push(c);
        }
    }

    let mut triplets = Vec::with_capacity(9 * n);
    let mut rhs = vec![0.0; n];
    for (v, cells) in node_cells.iter().enumerate() {
        let region = InteractionRegion::build(grid, field, v, cells)?;
        region.scatter(grid, &dirichlet, &mut triplets, &mut rhs)?;
    }
    SparseSystem::finish(grid, triplets, rhs, bc, &dirichlet, Scheme::MpfaO)
}

/// Half-edge flux out of a cell written as `Σ coef[a]·(u_a − p_cell)` over
/// the cell's two half-edges at the node.
struct CellFluxes {
    cell: usize,
    /// local half-edge indices of the two edges
    edges: [usize; 2],
    /// `coef[e][a]`: flux through edge `edges[e]` per unit of `u_{edges[a]} − p`
    coef: [[f64; 2]; 2],
}

struct InteractionRegion {
    node: usize,
    cells: Vec<usize>,
    faces: Vec<usize>,
    fluxes: Vec<CellFluxes>,
}

impl InteractionRegion {
    fn build(grid: &Grid, field: &TensorField, node: usize, cells: &[usize]) -> Result<Self> {
        let mut faces: Vec<usize> = Vec::with_capacity(4);
        let mut fluxes = Vec::with_capacity(cells.len());
        for &c in cells {
            let at_node: Vec<usize> = grid
                .cell_faces(c)
                .iter()
                .copied()
                .filter(|&f| grid.face(f).nodes.contains(&node))
                .collect();
            if at_node.len() != 2 {
                return Err(Error::Assembly(format!(
                    "node {node}: cell {c} has {} edges at the node",
                    at_node.len()
                )));
            }
            let mut edges = [0; 2];
            for (e, &f) in at_node.iter().enumerate() {
                edges[e] = match faces.iter().position(|&g| g == f) {
                    Some(k) => k,
                    None => {
                        faces.push(f);
                        faces.len() - 1
                    }
                };
            }
            let xc = grid.centroid(c);
            let d1 = sub(grid.face(at_node[0]).centroid, xc);
            let d2 = sub(grid.face(at_node[1]).centroid, xc);
            let det = d1[0] * d2[1] - d1[1] * d2[0];
            if det.abs() <= 1e-14 * (d1[0].hypot(d1[1]) * d2[0].hypot(d2[1])) {
                return Err(Error::Assembly(format!(
                    "node {node}: degenerate reconstruction triangle in cell {c}"
                )));
            }
            // gradient g = D⁻¹ [u1 − p, u2 − p] with D rows d1, d2
            let dinv = [[d2[1] / det, -d1[1] / det], [-d2[0] / det, d1[0] / det]];
            let k = field.tensor(c).as_matrix2();
            let mut coef = [[0.0; 2]; 2];
            for (e, &f) in at_node.iter().enumerate() {
                let face = grid.face(f);
                let s = if face.owner == c { 0.5 } else { -0.5 };
                let a = [s * face.area[0], s * face.area[1]];
                // flux = −aᵀ K D⁻¹ (u − p)
                let ak = [
                    a[0] * k[0][0] + a[1] * k[1][0],
                    a[0] * k[0][1] + a[1] * k[1][1],
                ];
                for col in 0..2 {
                    coef[e][col] = -(ak[0] * dinv[0][col] + ak[1] * dinv[1][col]);
                }
            }
            fluxes.push(CellFluxes {
                cell: c,
                edges,
                coef,
            });
        }
        Ok(Self {
            node,
            cells: cells.to_vec(),
            faces,
            fluxes,
        })
    }

    /// Solves the local continuity system for the half-edge pressures and
    /// adds the eliminated fluxes to the global rows.
    fn scatter(
        &self,
        grid: &Grid,
        dirichlet: &[Option<f64>],
        triplets: &mut Vec<(usize, usize, f64)>,
        rhs: &mut [f64],
    ) -> Result<()> {
        let nf = self.faces.len();
        let nc = self.cells.len();
        // Local system E u = -Ep p + d; rhs columns are the nc cell pressures
        // followed by one column carrying the Dirichlet data.
        let ncol = nc + 1;
        let mut e = vec![vec![0.0; nf]; nf];
        let mut r = vec![vec![0.0; ncol]; nf];
        for (row, &f) in self.faces.iter().enumerate() {
            if let Some(pd) = dirichlet[f] {
                e[row][row] = 1.0;
                r[row][nc] = pd;
            }
        }
        for (lc, cf) in self.fluxes.iter().enumerate() {
            for ei in 0..2 {
                let row = cf.edges[ei];
                if dirichlet[self.faces[row]].is_some() {
                    continue;
                }
                for a in 0..2 {
                    e[row][cf.edges[a]] += cf.coef[ei][a];
                    r[row][lc] += cf.coef[ei][a];
                }
            }
        }
        let u = solve_dense(e, r).ok_or_else(|| {
            Error::Assembly(format!(
                "node {}: singular interaction-region system",
                self.node
            ))
        })?;

        // Outflux through each interior or Dirichlet half-edge, taken from its owner.
        for (row, &f) in self.faces.iter().enumerate() {
            let face = grid.face(f);
            if face.neighbor.is_none() && dirichlet[f].is_none() {
                continue;
            }
            let (lc, cf) = self
                .fluxes
                .iter()
                .enumerate()
                .find(|(_, cf)| cf.cell == face.owner)
                .expect("owner belongs to the region");
            let ei = if cf.edges[0] == row { 0 } else { 1 };
            let mut cp = vec![0.0; ncol];
            for a in 0..2 {
                let c = cf.coef[ei][a];
                for (col, val) in cp.iter_mut().enumerate() {
                    *val += c * u[cf.edges[a]][col];
                }
                cp[lc] -= c;
            }
            let owner = face.owner;
            for (col, &val) in cp[..nc].iter().enumerate() {
                if val != 0.0 {
                    triplets.push((owner, self.cells[col], val));
                    if let Some(nb) = face.neighbor {
                        triplets.push((nb, self.cells[col], -val));
                    }
                }
            }
            rhs[owner] -= cp[nc];
            if let Some(nb) = face.neighbor {
                rhs[nb] += cp[nc];
            }
        }
        Ok(())
    }
}

/// Gaussian elimination with partial pivoting for a small dense system with
/// several right-hand sides. `None` if a pivot is negligible.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if n == 0 {
        return Some(b);
    }
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let l = a[i][k] / a[k][k];
            if l == 0.0 {
                continue;
            }
            for j in k..n {
                a[i][j] -= l * a[k][j];
            }
            for j in 0..b[i].len() {
                b[i][j] -= l * b[k][j];
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..b[k].len() {
            let mut s = b[k][j];
            for i in k + 1..n {
                s -= a[k][i] * b[i][j];
            }
            b[k][j] = s / a[k][k];
        }
    }
    Some(b)
}
