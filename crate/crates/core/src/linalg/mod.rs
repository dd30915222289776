//! Sparse kernels: products, direct solves and ILU0.

mod csr;
mod direct;
mod ilu0;

pub use csr::{SparseMatrix, PRUNE_BELOW};
pub use direct::{direct_solve, rcm_ordering, BandLu, DEFAULT_BAND_BUDGET};
pub use ilu0::{ilu0_factor, Ilu0Factors};

use crate::error::{Error, Result};

/// Galerkin-type triple product `R · (A · P)`.
pub fn triple_product(
    r: &SparseMatrix,
    a: &SparseMatrix,
    p: &SparseMatrix,
) -> Result<SparseMatrix> {
    if !a.is_square() || r.ncols() != a.nrows() || p.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "triple product",
            expected: a.nrows(),
            found: if r.ncols() != a.nrows() {
                r.ncols()
            } else {
                p.nrows()
            },
        });
    }
    r.matmul(&a.matmul(p)?)
}

pub fn spmv(a: &SparseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.spmv(x)
}

pub fn ilu0_apply(factors: &Ilu0Factors, r: &[f64]) -> Result<Vec<f64>> {
    factors.apply(r)
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
