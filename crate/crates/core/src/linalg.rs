//! Dense LU factorization with partial pivoting and a 1-norm condition
//! estimate (Hager's method with Higham's extra test vector).

use rayon::prelude::*;

use crate::error::{GsrError, Result};

/// Systems whose estimated 1-norm condition number exceeds this are refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Row-major LU factors of a square matrix: `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    norm1: f64,
}

impl LuFactors {
    /// Factor the `n x n` row-major matrix `a`.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
        let norm1 = one_norm(&a, n);
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pivot_abs) =
                (k..n)
                    .map(|i| (i, a[i * n + k].abs()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if !(pivot_abs > 0.0) || !pivot_abs.is_finite() {
                return Err(GsrError::numerical(
                    "LU factorization",
                    format!("zero or non-finite pivot in column {k}"),
                ));
            }
            if p != k {
                perm.swap(p, k);
                let (head, tail) = a.split_at_mut(p * n);
                head[k * n..(k + 1) * n].swap_with_slice(&mut tail[..n]);
            }

            let (head, rest) = a.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..];
            let pivot = pivot_row[k];
            let update = |row: &mut [f64]| {
                let l = row[k] / pivot;
                row[k] = l;
                if l != 0.0 {
                    for (x, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                        *x -= l * u;
                    }
                }
            };
            if (n - k) * (n - k) > 1 << 16 {
                rest.par_chunks_exact_mut(n).for_each(update);
            } else {
                rest.chunks_exact_mut(n).for_each(update);
            }
        }

        Ok(Self {
            n,
            lu: a,
            perm,
            norm1,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..]
                .iter()
                .zip(&x[i + 1..])
                .map(|(u, y)| u * y)
                .sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solve `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut w = b.to_vec();
        // U^T w = b, column-oriented sweep over rows of U
        for i in 0..n {
            let row = &self.lu[i * n..(i + 1) * n];
            w[i] /= row[i];
            let wi = w[i];
            for (t, &u) in w[i + 1..].iter_mut().zip(&row[i + 1..]) {
                *t -= u * wi;
            }
        }
        // L^T v = w
        for i in (0..n).rev() {
            let row = &self.lu[i * n..i * n + i];
            let vi = w[i];
            for (t, &l) in w[..i].iter_mut().zip(row) {
                *t -= l * vi;
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    /// Estimate of `||A^{-1}||_1`.
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            estimate = y.iter().map(|v| v.abs()).sum::<f64>();
            let signs: Vec<f64> = y
                .iter()
                .map(|&v| if v >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            let z = self.solve_transpose(&signs);
            let (j, zmax) =
                z.iter().enumerate().fold(
                    (0, -1.0),
                    |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b },
                );
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x.iter_mut().for_each(|v| *v = 0.0);
            x[j] = 1.0;
        }
        // Higham's alternating test vector guards against Hager's blind spots.
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        let y = self.solve(&alt);
        let alt_est = 2.0 * y.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        estimate.max(alt_est)
    }

    /// Estimated 1-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.norm1 * self.inverse_norm1_estimate()
    }

    /// Fail when the estimated condition number exceeds [`MAX_CONDITION`].
    pub fn check_conditioning(&self, context: &str) -> Result<f64> {
        let cond = self.condition_estimate();
        if !cond.is_finite() || cond > MAX_CONDITION {
            return Err(GsrError::numerical(
                context,
                format!("ill-conditioned system, estimated condition number {cond:.3e}"),
            ));
        }
        Ok(cond)
    }
}

fn one_norm(a: &[f64], n: usize) -> f64 {
    let mut cols = vec![0.0; n];
    for row in a.chunks_exact(n) {
        for (c, v) in cols.iter_mut().zip(row) {
            *c += v.abs();
        }
    }
    cols.into_iter().fold(0.0, f64::max)
}
