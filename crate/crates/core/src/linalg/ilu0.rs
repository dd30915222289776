//! Incomplete LU factorization with zero fill.
//!
//! Factors are stored on the exact pattern of the input: the strictly lower
//! part holds `L` (unit diagonal implicit), the diagonal and upper part hold
//! `U`. Relies on sorted column indices per row.

use super::csr::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Ilu0Factors {
    lu: SparseMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0Factors {
    /// Combined `L\U` factor on the input pattern.
    pub fn factors(&self) -> &SparseMatrix {
        &self.lu
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// `z = U⁻¹ L⁻¹ r`.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "ilu0 apply",
                expected: self.dim(),
                found: r.len(),
            });
        }
        let mut z = r.to_vec();
        self.apply_in_place(&mut z);
        Ok(z)
    }

    pub(crate) fn apply_in_place(&self, z: &mut [f64]) {
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let va = self.lu.values();
        let n = self.dim();
        for i in 0..n {
            let mut acc = z[i];
            for k in rp[i]..self.diag_pos[i] {
                acc -= va[k] * z[ci[k]];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in self.diag_pos[i] + 1..rp[i + 1] {
                acc -= va[k] * z[ci[k]];
            }
            z[i] = acc / va[self.diag_pos[i]];
        }
    }
}

/// IKJ-ordered ILU0 recurrence restricted to the pattern of `a`.
pub fn ilu0_factor(a: &SparseMatrix) -> Result<Ilu0Factors> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "ilu0 factor (square)",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let n = a.nrows();
    let mut lu = a.clone();
    let rp = lu.row_ptr().to_vec();
    let ci = lu.col_idx().to_vec();
    let mut diag_pos = Vec::with_capacity(n);
    for i in 0..n {
        match lu.find(i, i) {
            Some(k) if lu.values()[k] != 0.0 => diag_pos.push(k),
            _ => return Err(Error::ZeroPivot { row: i }),
        }
    }
    // position lookup for the current row
    let mut pos = vec![usize::MAX; n];
    let vals = lu.values_mut();
    for i in 0..n {
        for k in rp[i]..rp[i + 1] {
            pos[ci[k]] = k;
        }
        for k in rp[i]..diag_pos[i] {
            let p = ci[k];
            let pivot = vals[diag_pos[p]];
            let mult = vals[k] / pivot;
            vals[k] = mult;
            for kk in diag_pos[p] + 1..rp[p + 1] {
                let j = ci[kk];
                let slot = pos[j];
                if slot != usize::MAX {
                    vals[slot] -= mult * vals[kk];
                }
            }
        }
        for k in rp[i]..rp[i + 1] {
            pos[ci[k]] = usize::MAX;
        }
        let d = vals[diag_pos[i]];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::ZeroPivot { row: i });
        }
    }
    Ok(Ilu0Factors { lu, diag_pos })
}
