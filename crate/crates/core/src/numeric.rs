//! Small numerical helpers shared across modules.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Pairwise (cascade) summation; the result depends only on the slice order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "eigenvalues of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Ok(Vec::new());
    }
    crate::error::ensure_finite(m.as_slice(), "matrix")?;
    // Zero rows/columns split off exact zero eigenvalues. Removing them first
    // also sidesteps NaNs nalgebra's QR sweep produces on such matrices.
    let n = m.nrows();
    let keep: Vec<usize> = (0..n).filter(|&i| m.row(i).iter().any(|v| *v != 0.0)).collect();
    let mut eigs = vec![0.0; n - keep.len()];
    if !keep.is_empty() {
        let sub = DMatrix::from_fn(keep.len(), keep.len(), |i, j| m[(keep[i], keep[j])]);
        eigs.extend(sub.symmetric_eigenvalues().iter().copied());
    }
    if eigs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("eigensolver produced non-finite values".into()));
    }
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_op_norm(m: &DMatrix<f64>) -> Result<f64> {
    let eigs = symmetric_eigenvalues(m)?;
    Ok(eigs.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Largest singular value of a general real matrix.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0f64, |acc, v| acc.max(*v))
}

/// Trapezoid integral of samples `ys` on the (possibly uneven) grid `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Running trapezoid integral, starting at 0.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for (x, y) in xs.windows(2).zip(ys.windows(2)) {
        acc += 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
        out.push(acc);
    }
    out.truncate(xs.len());
    out
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
