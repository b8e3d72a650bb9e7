//! Dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on `|R_kk| / |R_00|` below which a pivot counts as zero.
pub(crate) const RANK_RTOL: f64 = 1e-10;

/// Householder QR with column pivoting by largest remaining column norm,
/// so that `|R_kk|` is non-increasing and trailing small pivots identify
/// the collinear columns.
pub(crate) struct PivotedQr {
    packed: DMatrix<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn new(mut a: DMatrix<f64>) -> Self {
        let (n, p) = a.shape();
        let kmax = n.min(p);
        let mut perm: Vec<usize> = (0..p).collect();
        let mut tau = vec![0.0; kmax];
        for k in 0..kmax {
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..p {
                let s: f64 = a.view((k, j), (n - k, 1)).iter().map(|v| v * v).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                a.swap_columns(k, best);
                perm.swap(k, best);
            }
            let norm = best_norm.sqrt();
            if norm == 0.0 {
                continue;
            }
            let x0 = a[(k, k)];
            let beta = if x0 >= 0.0 { -norm } else { norm };
            let scale = 1.0 / (x0 - beta);
            for i in k + 1..n {
                a[(i, k)] *= scale;
            }
            tau[k] = (beta - x0) / beta;
            a[(k, k)] = beta;
            for j in k + 1..p {
                let mut w = a[(k, j)];
                for i in k + 1..n {
                    w += a[(i, k)] * a[(i, j)];
                }
                w *= tau[k];
                a[(k, j)] -= w;
                for i in k + 1..n {
                    let v = a[(i, k)];
                    a[(i, j)] -= w * v;
                }
            }
        }
        let r00 = if kmax > 0 { a[(0, 0)].abs() } else { 0.0 };
        let rank = (0..kmax)
            .take_while(|&k| r00 > 0.0 && a[(k, k)].abs() > RANK_RTOL * r00)
            .count();
        PivotedQr { packed: a, tau, perm, rank }
    }

    #[cfg(test)]
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ncols(&self) -> usize {
        self.packed.ncols()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.ncols()
    }

    /// Original indices of the columns beyond the numerical rank.
    pub fn deficient_columns(&self) -> Vec<usize> {
        let mut cols = self.perm[self.rank..].to_vec();
        cols.sort_unstable();
        cols
    }

    fn apply_qt(&self, y: &mut [f64]) {
        let n = self.packed.nrows();
        for k in 0..self.tau.len() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut w = y[k];
            for i in k + 1..n {
                w += self.packed[(i, k)] * y[i];
            }
            w *= self.tau[k];
            y[k] -= w;
            for i in k + 1..n {
                y[i] -= w * self.packed[(i, k)];
            }
        }
    }

    /// Least-squares solution of `A x = y`; requires full column rank.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let p = self.ncols();
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        let mut z = vec![0.0; p];
        for k in (0..p).rev() {
            let mut s = qty[k];
            for j in k + 1..p {
                s -= self.packed[(k, j)] * z[j];
            }
            z[k] = s / self.packed[(k, k)];
        }
        let mut x = vec![0.0; p];
        for (k, &j) in self.perm.iter().enumerate() {
            x[j] = z[k];
        }
        x
    }

    /// `(A^T A)^{-1}` in the original column order; requires full column rank.
    pub fn inverse_gram(&self) -> DMatrix<f64> {
        let p = self.ncols();
        // R^{-1} by back substitution, column by column
        let mut rinv = DMatrix::<f64>::zeros(p, p);
        for c in 0..p {
            for k in (0..=c).rev() {
                let mut s = if k == c { 1.0 } else { 0.0 };
                for j in k + 1..=c {
                    s -= self.packed[(k, j)] * rinv[(j, c)];
                }
                rinv[(k, c)] = s / self.packed[(k, k)];
            }
        }
        let g = &rinv * rinv.transpose();
        let mut out = DMatrix::<f64>::zeros(p, p);
        for a in 0..p {
            for b in 0..p {
                out[(self.perm[a], self.perm[b])] = g[(a, b)];
            }
        }
        out
    }
}

/// Ratio of extreme singular values (infinite when singular).
pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Condition number after scaling every column to unit Euclidean norm.
pub(crate) fn scaled_condition_number(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    for mut col in s.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    condition_number(&s)
}

/// Inverse of a square matrix, with its condition number.
pub(crate) fn invert(m: &DMatrix<f64>) -> (Option<DMatrix<f64>>, f64) {
    let cond = condition_number(m);
    (m.clone().lu().try_inverse(), cond)
}

/// Solve a symmetric positive definite system, falling back to LU.
pub(crate) fn solve_spd(m: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    match m.clone().cholesky() {
        Some(ch) => Some(ch.solve(b)),
        None => m.lu().solve(b),
    }
}
