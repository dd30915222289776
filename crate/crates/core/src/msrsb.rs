//! Restricted-smoothing multiscale basis functions and transfer operators.
//!
//! Basis columns start as block indicators and are relaxed by weighted
//! Jacobi on a zero-row-sum copy of the fine operator. Increments are cut to
//! each column's support region, and cells next to a support edge are
//! rescaled so every row of the prolongation keeps summing to one.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{CoarsePartition, SupportRegions};
use crate::linalg::SparseMatrix;

pub const DEFAULT_OMEGA: f64 = 2.0 / 3.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_MAX_SWEEPS: usize = 250;

/// Tolerance on `|Σ_j P_ij − 1|` checked after every sweep.
pub const UNITY_TOLERANCE: f64 = 1e-12;

/// `n × m` prolongation whose columns are basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Prolongation {
    pub matrix: SparseMatrix,
    /// Sweeps performed to produce `matrix`.
    pub iterations: usize,
    /// Largest entry change in the last sweep (zero before any sweep).
    pub max_increment: f64,
    pub converged: bool,
}

impl Prolongation {
    pub fn num_fine(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_coarse(&self) -> usize {
        self.matrix.ncols()
    }

    /// Smallest and largest stored entry.
    pub fn value_range(&self) -> (f64, f64) {
        self.matrix
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Largest deviation of a row sum from one.
    pub fn unity_defect(&self) -> f64 {
        self.matrix
            .row_sums()
            .iter()
            .fold(0.0, |m, s| f64::max(m, (s - 1.0).abs()))
    }

    /// `(cell, value)` pairs of column `j`.
    pub fn column(&self, j: usize) -> Vec<(usize, f64)> {
        (0..self.num_fine())
            .filter_map(|i| self.matrix.find(i, j).map(|k| (i, self.matrix.values()[k])))
            .collect()
    }

    /// Writes one `cell,value` line per stored entry of column `j`.
    pub fn write_column<W: Write>(&self, j: usize, mut out: W) -> std::io::Result<()> {
        writeln!(out, "cell,value")?;
        for (i, v) in self.column(j) {
            writeln!(out, "{i},{v:.17e}")?;
        }
        Ok(())
    }

    /// Writes each column to `dir/basis_<j>.csv`; returns the file paths.
    pub fn export_columns(&self, dir: &Path, columns: &[usize]) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths = Vec::with_capacity(columns.len());
        for &j in columns {
            if j >= self.num_coarse() {
                return Err(Error::InvalidArgument(format!(
                    "basis column {j} out of range ({} columns)",
                    self.num_coarse()
                )));
            }
            let path = dir.join(format!("basis_{j}.csv"));
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            self.write_column(j, std::io::BufWriter::new(file))
                .map_err(|e| Error::io(&path, e))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Block indicator: `P_ij = 1` iff cell `i` lies in block `j`.
pub fn init_prolongation(partition: &CoarsePartition) -> Prolongation {
    let n = partition.num_cells();
    let row_ptr = (0..=n).collect();
    let col_idx = partition.block_of_cells().to_vec();
    let matrix = SparseMatrix::from_csr(n, partition.num_blocks(), row_ptr, col_idx, vec![1.0; n])
        .expect("indicator arrays are consistent");
    Prolongation {
        matrix,
        iterations: 0,
        max_increment: 0.0,
        converged: false,
    }
}

/// Copy of `a` whose diagonal is replaced by minus the sum of each row's
/// off-diagonals, so `A_conn · 1 = 0`.
pub fn connectivity_matrix(a: &SparseMatrix) -> SparseMatrix {
    let mut out = a.clone();
    let row_ptr = a.row_ptr().to_vec();
    let cols = a.col_idx().to_vec();
    let vals = out.values_mut();
    for i in 0..a.nrows() {
        let range = row_ptr[i]..row_ptr[i + 1];
        let off: f64 = range
            .clone()
            .filter(|&k| cols[k] != i)
            .map(|k| vals[k])
            .sum();
        if let Some(k) = range.clone().find(|&k| cols[k] == i) {
            vals[k] = -off;
        }
    }
    out
}

/// Weighted-Jacobi smoothing of `initial` restricted to the support regions.
///
/// Stops once the largest entry change of a sweep falls below `tol` or after
/// `max_iters` sweeps. Requires a positive diagonal in `a_conn`.
pub fn smooth_prolongation(
    a_conn: &SparseMatrix,
    initial: &Prolongation,
    supports: &SupportRegions,
    omega: f64,
    tol: f64,
    max_iters: usize,
) -> Result<Prolongation> {
    let n = a_conn.nrows();
    let m = initial.num_coarse();
    if !a_conn.is_square() || n != initial.num_fine() || n != supports.num_cells() {
        return Err(Error::DimensionMismatch {
            context: "basis smoothing",
            expected: n,
            found: initial.num_fine(),
        });
    }
    if m != supports.num_blocks() {
        return Err(Error::DimensionMismatch {
            context: "basis smoothing blocks",
            expected: supports.num_blocks(),
            found: m,
        });
    }
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "relaxation weight {omega} outside (0, 1]"
        )));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "smoothing tolerance {tol} is negative"
        )));
    }

    let diag = a_conn.diagonal();
    if let Some(i) = (0..n).find(|&i| !(diag[i] > 0.0)) {
        return Err(Error::BasisDivergence {
            sweep: 0,
            cell: i,
            denominator: diag[i],
        });
    }
    let renormalize = supports.renormalization_set(a_conn);

    // Full structural pattern: row i holds every block whose support covers i.
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        col_idx.extend_from_slice(supports.covering(i));
        row_ptr.push(col_idx.len());
    }
    let mut values = vec![0.0; col_idx.len()];
    for (i, j, v) in initial.matrix.entries() {
        let k = row_ptr[i]
            + col_idx[row_ptr[i]..row_ptr[i + 1]]
                .binary_search(&j)
                .map_err(|_| {
                    Error::InvalidArgument(format!(
                        "initial basis has entry ({i}, {j}) outside the support of block {j}"
                    ))
                })?;
        values[k] = v;
    }

    let mut next = values.clone();
    let mut incr = vec![0.0; values.len()];
    let mut iterations = 0;
    let mut max_increment = 0.0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        // Phase 1: truncated increments from the previous sweep's values.
        for i in 0..n {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            let acc = &mut incr[row_ptr[i]..row_ptr[i + 1]];
            acc.fill(0.0);
            for (k, a) in a_conn.row_entries(i) {
                for p in row_ptr[k]..row_ptr[k + 1] {
                    if let Ok(q) = cols.binary_search(&col_idx[p]) {
                        acc[q] += a * values[p];
                    }
                }
            }
            let scale = -omega / diag[i];
            acc.iter_mut().for_each(|d| *d *= scale);
        }
        // Phase 2: update. Rows next to a support edge are rescaled by
        // 1 + s; elsewhere s vanishes up to rounding, and dividing by the
        // computed row sum keeps that rounding from accumulating.
        let mut change = 0.0f64;
        for i in 0..n {
            let range = row_ptr[i]..row_ptr[i + 1];
            let denom: f64 = range.clone().map(|k| values[k] + incr[k]).sum();
            if renormalize[i] && !(denom > 0.0) {
                return Err(Error::BasisDivergence {
                    sweep: iterations,
                    cell: i,
                    denominator: denom,
                });
            }
            for k in range {
                next[k] = (values[k] + incr[k]) / denom;
                change = change.max((next[k] - values[k]).abs());
            }
        }
        std::mem::swap(&mut values, &mut next);
        max_increment = change;
        for i in 0..n {
            let s: f64 = values[row_ptr[i]..row_ptr[i + 1]].iter().sum();
            assert!(
                (s - 1.0).abs() <= UNITY_TOLERANCE,
                "partition of unity lost at cell {i} in sweep {iterations}: row sum {s}"
            );
        }
        if !change.is_finite() {
            return Err(Error::BasisDivergence {
                sweep: iterations,
                cell: 0,
                denominator: f64::NAN,
            });
        }
        if change < tol {
            converged = true;
            break;
        }
    }
    let matrix = SparseMatrix::from_csr(n, m, row_ptr, col_idx, values)?;
    Ok(Prolongation {
        matrix,
        iterations,
        max_increment,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestrictionKind {
    ControlVolume,
    Galerkin,
}

/// `m × n` restriction operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    pub matrix: SparseMatrix,
    pub kind: RestrictionKind,
}

/// Block indicator rows: `R_ji = 1` iff cell `i` lies in block `j`.
pub fn restriction_cv(partition: &CoarsePartition) -> Restriction {
    Restriction {
        matrix: init_prolongation(partition).matrix.transpose(),
        kind: RestrictionKind::ControlVolume,
    }
}

/// Transpose of the prolongation.
pub fn restriction_galerkin(p: &Prolongation) -> Restriction {
    Restriction {
        matrix: p.matrix.transpose(),
        kind: RestrictionKind::Galerkin,
    }
}
