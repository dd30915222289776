//! Algebraic monotonicity repair.
//!
//! Positive off-diagonal entries `a_ij` are moved onto the diagonal through a
//! perturbation `B` with zero row and column sums, so the repaired operator
//! acts on constant vectors exactly like the original. The coarse variant
//! only touches entries whose ratio to the row diagonal exceeds a threshold
//! and scales the move by a weight; the fine variant moves every positive
//! off-diagonal in full.

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::solver::nullspace_drift;

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FlaggedEntry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    /// `value / a_ii`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FlaggedEntries {
    pub entries: Vec<FlaggedEntry>,
    pub epsilon: f64,
}

impl FlaggedEntries {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub matrix: SparseMatrix,
    pub weight: f64,
}

/// Off-diagonal entries with `a_ij > 0` and `a_ij / a_ii > epsilon`, in row
/// order. Every diagonal must be positive.
pub fn flag_positive_offdiagonals(a: &SparseMatrix, epsilon: f64) -> Result<FlaggedEntries> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "repair operator",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {epsilon} is negative"
        )));
    }
    let diag = a.diagonal();
    if let Some(row) = (0..a.nrows()).find(|&i| !(diag[i] > 0.0)) {
        return Err(Error::InvalidOperator {
            row,
            value: diag[row],
        });
    }
    let entries = a
        .positive_offdiagonals()
        .filter_map(|(row, col, value)| {
            let ratio = value / diag[row];
            (ratio > epsilon).then_some(FlaggedEntry {
                row,
                col,
                value,
                ratio,
            })
        })
        .collect();
    Ok(FlaggedEntries { entries, epsilon })
}

/// Accumulates the zero-sum stencil of every flagged entry using the
/// entry's original value.
pub fn build_perturbation(
    a: &SparseMatrix,
    flags: &FlaggedEntries,
    weight: f64,
) -> Result<Perturbation> {
    if !weight.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "weight {weight} is not finite"
        )));
    }
    let n = a.nrows();
    let mut triplets = Vec::with_capacity(4 * flags.len());
    for f in &flags.entries {
        let v = weight * f.value;
        triplets.push((f.row, f.row, v));
        triplets.push((f.row, f.col, -v));
        triplets.push((f.col, f.row, -v));
        triplets.push((f.col, f.col, v));
    }
    let matrix = SparseMatrix::from_triplets(n, n, &triplets, false)?;
    let scale = flags
        .entries
        .iter()
        .fold(0.0f64, |m, f| m.max(f.value.abs()))
        * weight.abs();
    let bound = 1e-13 * scale.max(f64::MIN_POSITIVE) * 4.0 * flags.len().max(1) as f64;
    debug_assert!(matrix.row_sums().iter().all(|s| s.abs() <= bound));
    debug_assert!(matrix.col_sums().iter().all(|s| s.abs() <= bound));
    Ok(Perturbation { matrix, weight })
}

/// Diagnostics of one repair.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RepairReport {
    pub positive_offdiagonals: usize,
    pub flagged: usize,
    pub max_ratio: f64,
    pub epsilon: f64,
    pub weight: f64,
    pub nullspace_drift: f64,
    pub max_diagonal: f64,
}

impl RepairReport {
    pub fn to_text(&self) -> String {
        format!(
            "positive off-diagonals: {}\nflagged (ratio > {}): {}\nmax ratio: {:.6e}\nweight: {}\nnull-space drift: {:.3e} (max diagonal {:.6e})\n",
            self.positive_offdiagonals,
            self.epsilon,
            self.flagged,
            self.max_ratio,
            self.weight,
            self.nullspace_drift,
            self.max_diagonal
        )
    }
}

/// Result of repairing one operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Repair {
    pub operator: SparseMatrix,
    pub flagged: FlaggedEntries,
    pub perturbation: Perturbation,
    pub report: RepairReport,
}

/// Flags, perturbs and reports in one pass over `a`.
pub fn repair(a: &SparseMatrix, epsilon: f64, weight: f64) -> Result<Repair> {
    let flagged = flag_positive_offdiagonals(a, epsilon)?;
    finish_repair(a, flagged, weight)
}

/// Repair with every positive off-diagonal flagged and `w = 1`. No ratio
/// test is made, so the diagonal may have any sign.
pub fn repair_fine(a: &SparseMatrix) -> Result<Repair> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "repair operator",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let diag = a.diagonal();
    let entries = a
        .positive_offdiagonals()
        .map(|(row, col, value)| FlaggedEntry {
            row,
            col,
            value,
            ratio: value / diag[row],
        })
        .collect();
    finish_repair(
        a,
        FlaggedEntries {
            entries,
            epsilon: 0.0,
        },
        1.0,
    )
}

fn finish_repair(a: &SparseMatrix, flagged: FlaggedEntries, weight: f64) -> Result<Repair> {
    let perturbation = build_perturbation(a, &flagged, weight)?;
    let operator = if flagged.is_empty() {
        a.clone()
    } else {
        a.add(&perturbation.matrix)?
    };
    let diag = a.diagonal();
    let mut all = 0;
    let mut max_ratio = 0.0f64;
    for (i, _, v) in a.positive_offdiagonals() {
        all += 1;
        max_ratio = max_ratio.max(v / diag[i]);
    }
    let report = RepairReport {
        positive_offdiagonals: all,
        flagged: flagged.len(),
        max_ratio,
        epsilon: flagged.epsilon,
        weight,
        nullspace_drift: nullspace_drift(a, &operator)?,
        max_diagonal: a.max_abs_diagonal(),
    };
    Ok(Repair {
        operator,
        flagged,
        perturbation,
        report,
    })
}

/// Coarse-operator repair `A_m = A_c + B`.
pub fn am_operator(a_c: &SparseMatrix, epsilon: f64, weight: f64) -> Result<SparseMatrix> {
    Ok(repair(a_c, epsilon, weight)?.operator)
}

/// Fine-operator preprocessing for basis construction: every positive
/// off-diagonal is moved in full (`w = 1`, no threshold).
pub fn m_matrix_fine(a_f: &SparseMatrix) -> Result<SparseMatrix> {
    Ok(repair_fine(a_f)?.operator)
}
