//! Fine-scale finite-volume assembly of `A p = q`.
//!
//! Row `i` states that the net Darcy outflow of cell `i` equals its source
//! `q_i`; Dirichlet faces move their known pressure to the right-hand side.

mod mpfa;
mod tpfa;

pub use mpfa::assemble_mpfa_o;
pub use tpfa::{assemble_tpfa, half_transmissibility};

use crate::error::{Error, Result};
use crate::geometry::{BoundarySide, Grid, Point};
use crate::linalg::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Tpfa,
    MpfaO,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FaceSelector {
    Side(BoundarySide),
    Faces(Vec<usize>),
}

/// Dirichlet data and optional per-cell sources. Boundary faces without an
/// entry are no-flow.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundarySpec {
    pub dirichlet: Vec<(FaceSelector, f64)>,
    pub source: Option<Vec<f64>>,
}

impl BoundarySpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unit-style side-to-side drive: `left` on the left side, `right` on the
    /// right side, no-flow elsewhere.
    pub fn left_to_right(left: f64, right: f64) -> Self {
        Self::new()
            .with_side(BoundarySide::Left, left)
            .with_side(BoundarySide::Right, right)
    }

    /// Constant `value` on every boundary face.
    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self::sampled(grid, |_| value)
    }

    /// Every boundary face gets `f(face centroid)`.
    pub fn sampled(grid: &Grid, f: impl Fn(Point) -> f64) -> Self {
        let mut spec = Self::new();
        for face in grid.boundary_faces() {
            spec.dirichlet
                .push((FaceSelector::Faces(vec![face]), f(grid.face(face).centroid)));
        }
        spec
    }

    pub fn with_side(mut self, side: BoundarySide, value: f64) -> Self {
        self.dirichlet.push((FaceSelector::Side(side), value));
        self
    }

    pub fn with_faces(mut self, faces: Vec<usize>, value: f64) -> Self {
        self.dirichlet.push((FaceSelector::Faces(faces), value));
        self
    }

    pub fn with_source(mut self, q: Vec<f64>) -> Self {
        self.source = Some(q);
        self
    }

    /// Dirichlet value per face, validating that each selected face is on the
    /// boundary and appears only once.
    pub fn resolve(&self, grid: &Grid) -> Result<Vec<Option<f64>>> {
        let mut values = vec![None; grid.num_faces()];
        let mut set = |f: usize, v: f64| -> Result<()> {
            if f >= grid.num_faces() || !grid.face(f).is_boundary() {
                return Err(Error::InvalidArgument(format!(
                    "face {f} is not a boundary face"
                )));
            }
            if values[f].replace(v).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "face {f} appears in more than one Dirichlet entry"
                )));
            }
            Ok(())
        };
        for (sel, v) in &self.dirichlet {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "Dirichlet value {v} is not finite"
                )));
            }
            match sel {
                FaceSelector::Side(side) => {
                    for f in grid.boundary_faces() {
                        if grid.face(f).side == Some(*side) {
                            set(f, *v)?;
                        }
                    }
                }
                FaceSelector::Faces(list) => {
                    for &f in list {
                        set(f, *v)?;
                    }
                }
            }
        }
        if let Some(q) = &self.source {
            if q.len() != grid.num_cells() {
                return Err(Error::DimensionMismatch {
                    context: "source vector",
                    expected: grid.num_cells(),
                    found: q.len(),
                });
            }
        }
        Ok(values)
    }
}

/// Assembled fine-scale system.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// `(face, prescribed pressure)` for every Dirichlet face.
    pub dirichlet: Vec<(usize, f64)>,
    pub scheme: Scheme,
}

impl SparseSystem {
    pub(crate) fn finish(
        grid: &Grid,
        triplets: Vec<(usize, usize, f64)>,
        mut rhs: Vec<f64>,
        bc: &BoundarySpec,
        dirichlet: &[Option<f64>],
        scheme: Scheme,
    ) -> Result<Self> {
        let n = grid.num_cells();
        let matrix = SparseMatrix::from_triplets(n, n, &triplets, true)?;
        if let Some(q) = &bc.source {
            for (r, qi) in rhs.iter_mut().zip(q) {
                *r += qi;
            }
        }
        let dirichlet = dirichlet
            .iter()
            .enumerate()
            .filter_map(|(f, v)| v.map(|v| (f, v)))
            .collect();
        Ok(Self {
            matrix,
            rhs,
            dirichlet,
            scheme,
        })
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }
}

/// Whether `a` is a (weakly diagonally dominant) M-matrix pattern: positive
/// diagonal, nonpositive off-diagonals, nonnegative row sums up to `tol`
/// relative to the row's largest entry.
pub fn is_m_matrix(a: &SparseMatrix, tol: f64) -> bool {
    (0..a.nrows()).all(|i| {
        let mut diag = 0.0;
        let mut off = 0.0;
        let mut big = 0.0f64;
        for (j, v) in a.row_entries(i) {
            big = big.max(v.abs());
            if i == j {
                diag = v;
            } else if v > 0.0 {
                return false;
            } else {
                off += v;
            }
        }
        diag > 0.0 && diag + off >= -tol * big
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_cartesian_grid;

    #[test]
    fn resolve_rejects_duplicates_and_interior_faces() {
        let g = build_cartesian_grid(&[2.0, 1.0], &[2, 1]).unwrap();
        let spec = BoundarySpec::left_to_right(1.0, 0.0).with_side(BoundarySide::Left, 2.0);
        assert!(spec.resolve(&g).is_err());
        let interior = (0..g.num_faces())
            .find(|&f| !g.face(f).is_boundary())
            .unwrap();
        assert!(BoundarySpec::new()
            .with_faces(vec![interior], 1.0)
            .resolve(&g)
            .is_err());
        let ok = BoundarySpec::left_to_right(1.0, 0.0).resolve(&g).unwrap();
        assert_eq!(ok.iter().filter(|v| v.is_some()).count(), 2);
    }
}
