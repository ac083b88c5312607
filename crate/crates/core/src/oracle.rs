//! Reference distributions by power iteration: left Perron vectors of
//! nonnegative sparse operators, stationary laws of stochastic matrices, and
//! eigenvector centrality.

use crate::graph::DirectedGraph;
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Iterations without a new best residual before the periodicity shift kicks in.
const STALL_WINDOW: usize = 1_000;
/// Diagonal shift, relative to the largest row sum of the operator.
const SHIFT: f64 = 1e-3;

/// Nonnegative sparse matrix stored as row-sorted triplets.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Entries must be finite and strictly positive; duplicates are summed.
    pub fn new(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(row, col, value) in &entries {
            if row >= n || col >= n {
                return Err(Error::NodeOutOfRange {
                    node: row.max(col),
                    n,
                });
            }
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidEntry { row, col, value });
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut op = Self {
            n,
            rows: Vec::with_capacity(entries.len()),
            cols: Vec::with_capacity(entries.len()),
            values: Vec::with_capacity(entries.len()),
        };
        for (row, col, value) in entries {
            if op.rows.last() == Some(&row) && op.cols.last() == Some(&col) {
                *op.values.last_mut().unwrap() += value;
            } else {
                op.rows.push(row);
                op.cols.push(col);
                op.values.push(value);
            }
        }
        Ok(op)
    }

    /// Adjacency matrix of `g` (all ones on edges).
    pub fn adjacency(g: &DirectedGraph) -> Self {
        Self::new(g.node_count(), g.edges().map(|(i, j)| (i, j, 1.0)).collect())
            .expect("graph edges are valid entries")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.values.len()).map(move |k| (self.rows[k], self.cols[k], self.values[k]))
    }

    /// `out = v M`.
    pub fn left_mul(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..self.values.len() {
            out[self.cols[k]] += v[self.rows[k]] * self.values[k];
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for (r, _, v) in self.entries() {
            sums[r] += v;
        }
        sums
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.n, self.entries().map(|(r, c, v)| (r, c, v * k)).collect())
    }

    /// `M + shift * I`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let mut entries: Vec<_> = self.entries().collect();
        entries.extend((0..self.n).map(|i| (i, i, shift)));
        Self::new(self.n, entries)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (r, c, v) in self.entries() {
            m[r][c] += v;
        }
        m
    }

    fn first_empty_column(&self) -> Option<usize> {
        let mut hit = vec![false; self.n];
        for &c in &self.cols {
            hit[c] = true;
        }
        hit.iter().position(|&h| !h)
    }
}

/// Normalized left Perron vector and its eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResult {
    pub vector: Vec<f64>,
    pub eigenvalue: f64,
    pub iterations: usize,
    /// Final `‖vM − λv‖₁ / λ`.
    pub residual: f64,
    /// Diagonal shift that was needed to break periodicity (0 if none).
    pub shift: f64,
}

/// Leading left eigenvector of an irreducible nonnegative operator.
///
/// Converges when `‖vM − λv‖₁ ≤ tol·λ`. If the residual stops improving
/// (periodic operator), the iteration restarts on `M + εI`; the eigenvector
/// is unchanged and the reported eigenvalue is corrected by `−ε`.
pub fn left_leading_eigen(m: &SparseOperator, tol: f64, max_iter: usize) -> Result<SpectralResult> {
    if m.dim() == 0 {
        return Err(Error::EmptyGraph);
    }
    if let Some(col) = m.first_empty_column() {
        return Err(Error::ZeroColumn(col));
    }
    match power_iterate(m, tol, max_iter)? {
        Outcome::Converged(r) => Ok(r),
        Outcome::Stalled { iterations, .. } => {
            let max_row = m.row_sums().into_iter().fold(0.0, f64::max);
            let eps = SHIFT * max_row;
            match power_iterate(&m.shifted(eps)?, tol, max_iter.saturating_sub(iterations))? {
                Outcome::Converged(mut r) => {
                    r.eigenvalue -= eps;
                    r.iterations += iterations;
                    r.shift = eps;
                    Ok(r)
                }
                Outcome::Stalled {
                    iterations: more,
                    residual,
                } => Err(Error::NoConvergence {
                    iterations: iterations + more,
                    residual,
                }),
            }
        }
    }
}

enum Outcome {
    Converged(SpectralResult),
    Stalled { iterations: usize, residual: f64 },
}

fn power_iterate(m: &SparseOperator, tol: f64, max_iter: usize) -> Result<Outcome> {
    let n = m.dim();
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut best_at = 0usize;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        m.left_mul(&v, &mut w);
        let lambda: f64 = w.iter().sum();
        if !(lambda > 0.0 && lambda.is_finite()) {
            // Every column is hit, so this only happens when all mass sits on zero rows.
            return Err(Error::NoConvergence {
                iterations: it,
                residual: f64::NAN,
            });
        }
        residual = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).abs()).sum::<f64>() / lambda;
        for (x, y) in v.iter_mut().zip(&w) {
            *x = y / lambda;
        }
        if residual <= tol {
            return Ok(Outcome::Converged(SpectralResult {
                vector: v,
                eigenvalue: lambda,
                iterations: it,
                residual,
                shift: 0.0,
            }));
        }
        if residual < best {
            best = residual;
            best_at = it;
        } else if it - best_at >= STALL_WINDOW {
            return Ok(Outcome::Stalled {
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Stationary distribution of a row-stochastic operator.
pub fn stationary(p: &SparseOperator, tol: f64, max_iter: usize) -> Result<SpectralResult> {
    for (row, sum) in p.row_sums().into_iter().enumerate() {
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotStochastic { row, sum });
        }
    }
    let mut r = left_leading_eigen(p, tol, max_iter)?;
    if (r.eigenvalue - 1.0).abs() < tol {
        r.eigenvalue = 1.0;
    }
    Ok(r)
}

/// Eigenvector centrality: normalized left leading eigenvector of the
/// adjacency matrix, with the spectral radius as eigenvalue.
pub fn evc(g: &DirectedGraph, tol: f64, max_iter: usize) -> Result<SpectralResult> {
    if !g.is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    left_leading_eigen(&SparseOperator::adjacency(g), tol, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(n: usize, entries: &[(usize, usize, f64)]) -> SparseOperator {
        SparseOperator::new(n, entries.to_vec()).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        assert!(d <= tol, "{a:?} vs {b:?} (l1 {d:e})");
    }

    #[test]
    fn three_cycle_is_uniform() {
        let r = left_leading_eigen(&op(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]), 1e-12, 1000).unwrap();
        assert_close(&r.vector, &[1.0 / 3.0; 3], 1e-12);
        assert!((r.eigenvalue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_two_by_two_needs_shift() {
        // vM = λv with M = [[0, a], [b, 0]]: λ² = ab, v ∝ (√b, √a).
        let r = left_leading_eigen(&op(2, &[(0, 1, 0.5), (1, 0, 0.125)]), 1e-12, 1_000_000).unwrap();
        assert!(r.shift > 0.0);
        assert!((r.eigenvalue - 0.25).abs() < 1e-9, "{}", r.eigenvalue);
        assert_close(&r.vector, &[1.0 / 3.0, 2.0 / 3.0], 1e-9);
    }

    #[test]
    fn two_state_chain() {
        let p = op(2, &[(0, 0, 0.9), (0, 1, 0.1), (1, 0, 0.3), (1, 1, 0.7)]);
        let r = stationary(&p, 1e-13, 100_000).unwrap();
        assert_eq!(r.eigenvalue, 1.0);
        assert_close(&r.vector, &[0.75, 0.25], 1e-11);
    }

    #[test]
    fn stationary_rejects_substochastic_rows() {
        let p = op(2, &[(0, 1, 0.5), (1, 0, 1.0)]);
        assert!(matches!(stationary(&p, 1e-12, 100), Err(Error::NotStochastic { row: 0, .. })));
    }

    #[test]
    fn empty_column_is_reducible() {
        let m = op(3, &[(0, 1, 1.0), (1, 0, 1.0), (2, 0, 1.0)]);
        assert!(matches!(left_leading_eigen(&m, 1e-12, 100), Err(Error::ZeroColumn(2))));
    }

    #[test]
    fn invalid_entries_rejected() {
        assert!(SparseOperator::new(2, vec![(0, 1, 0.0)]).is_err());
        assert!(SparseOperator::new(2, vec![(0, 1, f64::NAN)]).is_err());
        assert!(SparseOperator::new(2, vec![(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn complete_digraph_evc() {
        let g = DirectedGraph::from_edges(4, (0..4).flat_map(|i| (0..4).map(move |j| (i, j)))).unwrap();
        let r = evc(&g, 1e-12, 10_000).unwrap();
        assert_close(&r.vector, &[0.25; 4], 1e-12);
        assert!((r.eigenvalue - 3.0).abs() < 1e-11);
    }

    #[test]
    fn evc_requires_strong_connectivity() {
        let g = DirectedGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert!(matches!(evc(&g, 1e-12, 100), Err(Error::NotStronglyConnected)));
    }

    #[test]
    fn scaling_scales_eigenvalue_only() {
        let m = op(3, &[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 0.5), (1, 0, 1.0), (2, 2, 0.3)]);
        let a = left_leading_eigen(&m, 1e-13, 100_000).unwrap();
        let b = left_leading_eigen(&m.scaled(7.5).unwrap(), 1e-13, 100_000).unwrap();
        assert!((b.eigenvalue - 7.5 * a.eigenvalue).abs() < 1e-10);
        assert_close(&a.vector, &b.vector, 1e-10);
    }

    #[test]
    fn converged_vector_is_a_fixed_point() {
        let m = op(3, &[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 0.5), (1, 0, 1.0), (2, 2, 0.3)]);
        let r = left_leading_eigen(&m, 1e-12, 100_000).unwrap();
        let mut w = vec![0.0; 3];
        m.left_mul(&r.vector, &mut w);
        let again: Vec<f64> = w.iter().map(|x| x / r.eigenvalue).collect();
        assert_close(&again, &r.vector, 1e-11);
        assert!((r.vector.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
