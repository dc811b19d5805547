//! Tiny dense linear algebra: just enough to solve the dispatcher-memory
//! chains (a handful of states) and phase-type moment systems (a handful of
//! phases). Gaussian elimination with partial pivoting; no external solver
//! is warranted at these sizes.

use crate::{Error, Result};

/// Solves `a x = b` in place for square `a` (row-major, n x n).
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::InvalidState(format!(
                "singular matrix in linear solve (pivot column {col})"
            )));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * b[k];
        }
        b[col] = acc / a[col][col];
    }
    Ok(b)
}

/// Stationary row vector of a row-stochastic matrix `p`: solves
/// `pi P = pi`, `sum pi = 1` by replacing one equation of the singular
/// system `(P^T - I) pi = 0` with the normalization.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    // Overwrite the last balance equation (redundant: columns of P^T - I sum
    // to zero) with the normalization row.
    for j in 0..n {
        a[n - 1][j] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut pi = solve(a, b)?;
    for x in &mut pi {
        // Clamp the tiny negative round-off a transient state can produce.
        if *x < 0.0 && *x > -1e-12 {
            *x = 0.0;
        }
    }
    Ok(pi)
}
