//! Dense LU factorization with partial pivoting.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Solves `a x = b` for a row-major `n x n` matrix.
pub fn solve(n: usize, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch {
            what: "matrix",
            expected: n * n,
            found: a.len(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            what: "right-hand side",
            expected: n,
            found: b.len(),
        });
    }
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for row in col + 1..n {
            let v = m[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::Singular);
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            m[row * n + col] = 0.0;
            for k in col + 1..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }
    Ok(x)
}

/// Solves `(I - gamma * p) x = b` where `p` is row-major `n x n`.
pub fn solve_resolvent(n: usize, gamma: f64, p: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let mut a = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            a.push(id - gamma * p[i * n + j]);
        }
    }
    solve(n, &a, b)
}
