use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::symmetric_op_norm;

/// Largest matrix side accepted: the second-cumulant table is `N² x N²`.
const MAX_DIM: usize = 48;

/// Second-order cumulant summaries of a matrix ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulantReport {
    /// Operator norm of `|κ(α, β)|` over entry indices `α = (a, b)`.
    pub av2_norm: f64,
    /// Upper bound on the isotropic second cumulant norm using the trivial
    /// split `κ_d = κ, κ_c = 0` and `‖A‖ ≤ ‖A‖_F`: the operator norm of the
    /// `N³ x N` matrix `[(b1, a2, b2), a1] ↦ κ(a1 b1, a2 b2)`.
    pub iso2_upper: f64,
    /// Size of the per-index strongest-coupling set, `⌊N^{1/2−μ}⌋`, with the
    /// index itself counted.
    pub coupling_set_size: usize,
    /// Largest `|κ(α, β)|` once each `α` drops its strongest partners.
    pub offdiag_decay_max: f64,
    /// Mean of the per-`α` maxima behind `offdiag_decay_max`.
    pub offdiag_decay_mean: f64,
    pub samples: usize,
}

/// Population (1/m) covariances between all `N²` entries of the samples.
pub fn cumulant_diagnostics(samples: &[DMatrix<f64>], mu: f64) -> Result<CumulantReport> {
    if samples.len() < 2 {
        return Err(Error::Domain(format!(
            "cumulant diagnostics need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let n = samples[0].nrows();
    for s in samples {
        if s.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "sample of shape {:?}, expected {n}x{n}",
                s.shape()
            )));
        }
        crate::error::ensure_finite(s.as_slice(), "sample")?;
    }
    if n > MAX_DIM {
        return Err(Error::Capacity(format!(
            "cumulant table for N = {n} exceeds the N <= {MAX_DIM} limit"
        )));
    }
    let m = samples.len() as f64;
    let nn = n * n;
    // Rows: samples, columns: entries in column-major order, α = a + N b.
    let mut data = DMatrix::zeros(samples.len(), nn);
    for (r, s) in samples.iter().enumerate() {
        for (c, v) in s.iter().enumerate() {
            data[(r, c)] = *v;
        }
    }
    for mut col in data.column_iter_mut() {
        let mean = col.sum() / m;
        col.add_scalar_mut(-mean);
    }
    let kappa = data.tr_mul(&data) / m;
    let abs = kappa.abs();
    let av2_norm = symmetric_op_norm(&((&abs + abs.transpose()) * 0.5))?;

    // κ(a1 b1, a2 b2) = kappa[a1 + N b1, a2 + N b2]; Gram over a1 of the N³ x N matrix.
    let mut gram = DMatrix::zeros(n, n);
    for b1 in 0..n {
        for a2 in 0..n {
            for b2 in 0..n {
                let col = a2 + n * b2;
                for a1 in 0..n {
                    let u = kappa[(a1 + n * b1, col)];
                    if u == 0.0 {
                        continue;
                    }
                    for a1p in 0..n {
                        gram[(a1, a1p)] += u * kappa[(a1p + n * b1, col)];
                    }
                }
            }
        }
    }
    let iso2_upper = symmetric_op_norm(&((&gram + gram.transpose()) * 0.5))?.sqrt();

    let k = ((n as f64).powf(0.5 - mu).floor() as usize).clamp(1, nn);
    let mut maxima = Vec::with_capacity(nn);
    for alpha in 0..nn {
        let mut row: Vec<(f64, usize)> = (0..nn).map(|b| (abs[(alpha, b)], b)).collect();
        // Self first, then partners by decreasing strength (ties by index).
        row.sort_by(|x, y| {
            (y.1 == alpha)
                .cmp(&(x.1 == alpha))
                .then(y.0.total_cmp(&x.0))
                .then(x.1.cmp(&y.1))
        });
        let rest = row[k..].iter().map(|(v, _)| *v).fold(0.0, f64::max);
        maxima.push(rest);
    }
    Ok(CumulantReport {
        av2_norm,
        iso2_upper,
        coupling_set_size: k,
        offdiag_decay_max: maxima.iter().cloned().fold(0.0, f64::max),
        offdiag_decay_mean: maxima.iter().sum::<f64>() / nn as f64,
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// All ±1 patterns of the three free entries of a symmetric 2x2 matrix,
    /// repeated so the sample count exceeds 30.
    fn enumerated_2x2() -> Vec<DMatrix<f64>> {
        let mut out = Vec::new();
        for _ in 0..4 {
            for bits in 0..8u32 {
                let s = |k: u32| if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
                out.push(DMatrix::from_row_slice(2, 2, &[s(0), s(2), s(2), s(1)]));
            }
        }
        out
    }

    #[test]
    fn independent_symmetric_2x2() {
        let r = cumulant_diagnostics(&enumerated_2x2(), 0.1).unwrap();
        assert!((r.av2_norm - 2.0).abs() < 1e-12);
        assert!(r.iso2_upper.is_finite() && r.iso2_upper >= 0.0);
        assert_eq!(r.coupling_set_size, 1);
    }

    #[test]
    fn constant_samples_have_zero_cumulants() {
        let s = vec![DMatrix::from_element(3, 3, 0.7); 5];
        let r = cumulant_diagnostics(&s, 0.1).unwrap();
        assert_eq!((r.av2_norm, r.iso2_upper, r.offdiag_decay_max), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rejects_single_sample_and_large_n() {
        assert!(matches!(
            cumulant_diagnostics(&[DMatrix::zeros(2, 2)], 0.1),
            Err(Error::Domain(_))
        ));
        let big = vec![DMatrix::zeros(MAX_DIM + 1, MAX_DIM + 1); 2];
        assert!(matches!(cumulant_diagnostics(&big, 0.1), Err(Error::Capacity(_))));
    }
}
