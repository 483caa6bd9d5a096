use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const TAYLOR_TERMS: usize = 30;

/// Matrix exponential by scaling and squaring over a truncated Taylor series.
///
/// The input is scaled by `2^{-s}` until its 1-norm is at most 1/2, the series is
/// summed until terms fall below machine precision, and the result is squared `s`
/// times.
pub fn matrix_exp(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let norm = one_norm(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings);

    let mut result = DMatrix::<f64>::identity(rows, cols);
    let mut term = DMatrix::<f64>::identity(rows, cols);
    for j in 1..=TAYLOR_TERMS {
        term = &term * &scaled / j as f64;
        result += &term;
        if one_norm(&term) <= f64::EPSILON * one_norm(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest singular value, by power iteration on `MᵀM` until the Rayleigh
/// quotient changes by less than `1e-12` relative.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 || m.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    let gram = m.transpose() * m;
    // Deterministic start with distinct components so no eigenvector is missed
    // by symmetry.
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64 + 1.0).sqrt());
    x /= x.norm();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let y = &gram * &x;
        let next = x.dot(&y);
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = y / norm;
        if (next - lambda).abs() <= 1e-12 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}
