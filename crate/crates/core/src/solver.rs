//! One-step and iterative two-level multiscale solves plus diagnostics.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{ilu0_factor, norm2, BandLu, SparseMatrix};

/// Coarse correction `x ↦ P · C⁻¹ · R x` with `C` factored once.
#[derive(Debug, Clone)]
pub struct CoarseCorrection {
    restriction: SparseMatrix,
    factors: BandLu,
}

impl CoarseCorrection {
    pub fn new(restriction: &SparseMatrix, operator: &SparseMatrix) -> Result<Self> {
        if !operator.is_square() || restriction.nrows() != operator.nrows() {
            return Err(Error::DimensionMismatch {
                context: "coarse operator",
                expected: restriction.nrows(),
                found: operator.nrows(),
            });
        }
        Ok(Self {
            restriction: restriction.clone(),
            factors: BandLu::factor(operator)?,
        })
    }

    pub fn restriction(&self) -> &SparseMatrix {
        &self.restriction
    }

    /// Coarse solution for the fine vector `r`.
    pub fn solve_coarse(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.factors.solve(&self.restriction.spmv(r)?)
    }

    pub fn apply(&self, p: &SparseMatrix, r: &[f64]) -> Result<Vec<f64>> {
        p.spmv(&self.solve_coarse(r)?)
    }
}

/// `p_ms = P · coarse_op⁻¹ · R q`.
pub fn one_step_multiscale(
    q: &[f64],
    p: &SparseMatrix,
    r: &SparseMatrix,
    coarse_op: &SparseMatrix,
) -> Result<Vec<f64>> {
    check_transfer(p, r, q.len())?;
    CoarseCorrection::new(r, coarse_op)?.apply(p, q)
}

fn check_transfer(p: &SparseMatrix, r: &SparseMatrix, n: usize) -> Result<()> {
    if p.nrows() != n || r.ncols() != n || p.ncols() != r.nrows() {
        return Err(Error::DimensionMismatch {
            context: "transfer operators",
            expected: n,
            found: if p.nrows() != n { p.nrows() } else { r.ncols() },
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterativeOptions {
    pub tol: f64,
    pub max_cycles: usize,
    pub smoothing_steps: usize,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_cycles: 300,
            smoothing_steps: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ViolationCensus {
    pub lo: f64,
    pub hi: f64,
    pub below: usize,
    pub above: usize,
    /// `(cell, value)` of the lowest value under `lo`.
    pub worst_below: Option<(usize, f64)>,
    /// `(cell, value)` of the highest value over `hi`.
    pub worst_above: Option<(usize, f64)>,
    pub below_cells: Vec<usize>,
    pub above_cells: Vec<usize>,
}

impl ViolationCensus {
    pub fn total(&self) -> usize {
        self.below + self.above
    }
}

/// Echo of the settings that produced a report.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize)]
pub struct SolveSettings {
    pub restriction: String,
    pub repair: String,
    pub epsilon: Option<f64>,
    pub weight: Option<f64>,
    pub smoothing_steps: Option<usize>,
    pub coarsening_ratio: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, serde::Serialize)]
pub struct SolveReport {
    /// Relative residual `‖q − A p‖₂ / ‖q‖₂` after each cycle.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual after the concluding control-volume correction.
    pub final_cv_residual: Option<f64>,
    pub wall_time_seconds: f64,
    pub error_norms: Option<ErrorNorms>,
    pub violations: Option<ViolationCensus>,
    pub nullspace_drift: Option<f64>,
    pub settings: SolveSettings,
}

/// Two-level iteration from `p = 0`: each cycle applies `smoothing_steps`
/// ILU0 updates and one coarse correction. With `finalize`, a last
/// correction through that second coarse stage concludes the iteration.
///
/// Non-convergence is reported through `converged = false`; a non-finite
/// residual is a breakdown error carrying the history so far.
pub fn iterative_multiscale(
    a: &SparseMatrix,
    q: &[f64],
    p: &SparseMatrix,
    coarse: &CoarseCorrection,
    options: &IterativeOptions,
    finalize: Option<&CoarseCorrection>,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = q.len();
    if a.nrows() != n || !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "iterative solve",
            expected: n,
            found: a.nrows(),
        });
    }
    check_transfer(p, coarse.restriction(), n)?;
    if let Some(f) = finalize {
        check_transfer(p, f.restriction(), n)?;
    }
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {} must be positive",
            options.tol
        )));
    }
    let ilu = ilu0_factor(a)?;
    let qnorm = norm2(q);
    let mut x = vec![0.0; n];
    let mut report = SolveReport::default();
    if qnorm == 0.0 {
        report.converged = true;
        report.residual_history.push(0.0);
        report.wall_time_seconds = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }
    let mut r = vec![0.0; n];
    let residual = |x: &[f64], r: &mut Vec<f64>| {
        let ax = a.spmv(x).expect("dimensions checked");
        for i in 0..n {
            r[i] = q[i] - ax[i];
        }
    };
    for cycle in 1..=options.max_cycles {
        for _ in 0..options.smoothing_steps {
            residual(&x, &mut r);
            ilu.apply_in_place(&mut r);
            x.iter_mut().zip(&r).for_each(|(xi, di)| *xi += di);
        }
        residual(&x, &mut r);
        let dx = coarse.apply(p, &r)?;
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        residual(&x, &mut r);
        let rel = norm2(&r) / qnorm;
        report.residual_history.push(rel);
        report.iterations = cycle;
        if !rel.is_finite() {
            return Err(Error::Breakdown {
                cycle,
                history: report.residual_history,
            });
        }
        if rel <= options.tol {
            report.converged = true;
            break;
        }
    }
    if let Some(f) = finalize {
        residual(&x, &mut r);
        let dx = f.apply(p, &r)?;
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        residual(&x, &mut r);
        report.final_cv_residual = Some(norm2(&r) / qnorm);
    }
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Scaled norms `‖Δ‖₂/‖p_ref‖₂` and `max|Δ| / max|p_ref|`.
pub fn error_norms(p_ref: &[f64], p_ms: &[f64]) -> Result<ErrorNorms> {
    if p_ref.len() != p_ms.len() {
        return Err(Error::DimensionMismatch {
            context: "error norms",
            expected: p_ref.len(),
            found: p_ms.len(),
        });
    }
    let ref2: f64 = p_ref.iter().map(|v| v * v).sum();
    let refmax = p_ref.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if ref2 == 0.0 {
        return Err(Error::InvalidArgument("reference solution is zero".into()));
    }
    let d2: f64 = p_ref.iter().zip(p_ms).map(|(a, b)| (a - b) * (a - b)).sum();
    let dmax = p_ref
        .iter()
        .zip(p_ms)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(ErrorNorms {
        l2: (d2 / ref2).sqrt(),
        linf: dmax / refmax,
    })
}

/// Cells with values outside `[lo, hi]`.
pub fn bound_check(p: &[f64], lo: f64, hi: f64) -> Result<ViolationCensus> {
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!(
            "empty bound interval [{lo}, {hi}]"
        )));
    }
    let mut c = ViolationCensus {
        lo,
        hi,
        below: 0,
        above: 0,
        worst_below: None,
        worst_above: None,
        below_cells: Vec::new(),
        above_cells: Vec::new(),
    };
    for (i, &v) in p.iter().enumerate() {
        if v < lo {
            c.below += 1;
            c.below_cells.push(i);
            if c.worst_below.is_none_or(|(_, w)| v < w) {
                c.worst_below = Some((i, v));
            }
        } else if v > hi {
            c.above += 1;
            c.above_cells.push(i);
            if c.worst_above.is_none_or(|(_, w)| v > w) {
                c.worst_above = Some((i, v));
            }
        }
    }
    Ok(c)
}

/// `max(‖(A_m − A_c)·1‖_∞, ‖(A_m − A_c)ᵀ·1‖_∞)`.
pub fn nullspace_drift(a_c: &SparseMatrix, a_m: &SparseMatrix) -> Result<f64> {
    let d = a_m.add(&a_c.scaled(-1.0))?;
    let rows = d.row_sums();
    let cols = d.col_sums();
    Ok(rows.iter().chain(&cols).fold(0.0f64, |m, v| m.max(v.abs())))
}

/// `cycle,relative_residual` rows, cycles counted from 1.
pub fn write_residual_csv(path: &Path, history: &[f64]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(out, "cycle,relative_residual")?;
        for (k, r) in history.iter().enumerate() {
            writeln!(out, "{},{:.17e}", k + 1, r)?;
        }
        out.flush()
    };
    body().map_err(|e| Error::io(path, e))
}
