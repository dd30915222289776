//! Sparse direct solver: reverse Cuthill–McKee ordering followed by a banded
//! LU factorization with partial (row) pivoting.
//!
//! The band stores, for each row `r`, columns `r - kl ..= r + kl + ku`; row
//! interchanges only ever move entries at or right of the pivot column, so the
//! multipliers of earlier steps stay where they were written (LINPACK layout).

use std::collections::VecDeque;

use super::csr::SparseMatrix;
use crate::error::{Error, Result};

/// Default cap on stored band entries (about 800 MB of `f64`).
pub const DEFAULT_BAND_BUDGET: usize = 100_000_000;

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    band: Vec<f64>,
    pivots: Vec<usize>,
    /// `perm[new] = old`
    perm: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        Self::factor_with_budget(a, DEFAULT_BAND_BUDGET)
    }

    pub fn factor_with_budget(a: &SparseMatrix, budget: usize) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "direct solve (square)",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let n = a.nrows();
        let perm = rcm_ordering(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in a.entries() {
            let (r, c) = (inv[i], inv[j]);
            if c < r {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
        let width = 2 * kl + ku + 1;
        let required = width.saturating_mul(n);
        if required > budget {
            return Err(Error::TooLarge {
                order: n,
                required,
                budget,
            });
        }
        let mut band = vec![0.0; required];
        for (i, j, v) in a.entries() {
            let (r, c) = (inv[i], inv[j]);
            band[r * width + (c + kl - r)] = v;
        }
        let scale = a.max_abs();
        let mut lu = BandLu {
            n,
            kl,
            width,
            band,
            pivots: vec![0; n],
            perm,
        };
        lu.eliminate(ku, scale)?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> usize {
        // column c lives at offset c + kl - r of row r
        r * self.width + (c + self.kl - r)
    }

    fn eliminate(&mut self, ku: usize, scale: f64) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.at(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.band[self.at(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular { pivot: k });
            }
            self.pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (ik, ip) = (self.at(k, c), self.at(p, c));
                    self.band.swap(ik, ip);
                }
            }
            let pivot = self.band[self.at(k, k)];
            for r in k + 1..=last_row {
                let irk = self.at(r, k);
                let m = self.band[irk] / pivot;
                self.band[irk] = m;
                if m == 0.0 {
                    continue;
                }
                for c in k + 1..=last_col {
                    let src = self.band[self.at(k, c)];
                    if src != 0.0 {
                        let dst = self.at(r, c);
                        self.band[dst] -= m * src;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "direct solve rhs",
                expected: self.n,
                found: b.len(),
            });
        }
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != 0.0 {
                for r in k + 1..=(k + self.kl).min(n - 1) {
                    y[r] -= self.band[self.at(r, k)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let row = k * self.width;
            let mut acc = y[k];
            let last = (k + self.width - 1 - self.kl).min(n - 1);
            for c in k + 1..=last {
                acc -= self.band[row + c + self.kl - k] * y[c];
            }
            y[k] = acc / self.band[row + self.kl];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }
}

/// Solves `A x = b` once. Factor with [`BandLu::factor`] to reuse.
pub fn direct_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "direct solve rhs",
            expected: a.nrows(),
            found: b.len(),
        });
    }
    BandLu::factor(a)?.solve(b)
}

/// Reverse Cuthill–McKee on the symmetrized pattern. Each connected
/// component starts from a minimum-degree vertex; neighbours are visited by
/// increasing degree, ties by index.
pub fn rcm_ordering(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    let sym = {
        let t = a.transpose();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j, _) in a.entries().chain(t.entries()) {
            if i != j {
                adj[i].push(j);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    };
    let degree: Vec<usize> = sym.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    let mut queue = VecDeque::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let root = pseudo_peripheral(&sym, &degree, start);
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = sym[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// George–Liu heuristic: repeat BFS from the farthest minimum-degree node of
/// the last level until eccentricity stops growing.
fn pseudo_peripheral(adj: &[Vec<usize>], degree: &[usize], start: usize) -> usize {
    let mut root = start;
    let mut ecc = 0;
    let mut level = vec![usize::MAX; adj.len()];
    let mut touched = Vec::new();
    for _ in 0..8 {
        for &t in &touched {
            level[t] = usize::MAX;
        }
        touched.clear();
        let mut queue = VecDeque::from([root]);
        level[root] = 0;
        touched.push(root);
        let mut last = root;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in &adj[v] {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    touched.push(w);
                    queue.push_back(w);
                }
            }
        }
        let depth = level[last];
        let candidate = touched
            .iter()
            .copied()
            .filter(|&v| level[v] == depth)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(root);
        if depth <= ecc {
            break;
        }
        ecc = depth;
        root = candidate;
    }
    root
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual_ok(a: &SparseMatrix, x: &[f64], b: &[f64]) -> bool {
        let ax = a.spmv(x).unwrap();
        let r = ax
            .iter()
            .zip(b)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        r <= 1e-10 * (a.norm_inf() * xn + bn)
    }

    #[test]
    fn diagonal_solve() {
        let a = SparseMatrix::from_diagonal(&[2.0, 4.0]);
        assert_eq!(direct_solve(&a, &[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn two_by_two_hand_solve() {
        let a = SparseMatrix::from_dense(&[vec![3.0, -1.0], vec![-1.0, 3.0]]).unwrap();
        let x = direct_solve(&a, &[2.0, 0.0]).unwrap();
        assert!((x[0] - 0.75).abs() < 1e-15 && (x[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn singular_reports_pivot() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            direct_solve(&a, &[1.0, 1.0]),
            Err(Error::Singular { pivot: 1 })
        ));
    }

    #[test]
    fn pivoting_needed() {
        // zero leading diagonal forces a row interchange
        let a = SparseMatrix::from_dense(&[
            vec![0.0, 2.0, 0.0],
            vec![1.0, 1.0, 3.0],
            vec![0.0, 4.0, 1.0],
        ])
        .unwrap();
        let b = vec![2.0, 5.0, 5.0];
        let x = direct_solve(&a, &b).unwrap();
        assert!(residual_ok(&a, &x, &b));
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn budget_guard() {
        let a = SparseMatrix::identity(10);
        assert!(matches!(
            BandLu::factor_with_budget(&a, 5),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn rcm_is_permutation() {
        let a = SparseMatrix::from_dense(&[
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let mut p = rcm_ordering(&a);
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3]);
    }
}
