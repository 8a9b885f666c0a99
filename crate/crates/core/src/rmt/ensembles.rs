//! Seeded random-matrix ensembles.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::gaussian_matrix;
use crate::error::{Error, Result};
use crate::hessian::risk_hessian;
use crate::net::{Dataset, LossL0, NetworkParams, Sample};
use crate::poset::ActivationRule;

/// Semicircle density of variance `sigma²` (support `[−2σ, 2σ]`).
pub fn semicircle_density(x: f64, sigma: f64) -> f64 {
    let r2 = 4.0 * sigma * sigma - x * x;
    if r2 <= 0.0 {
        0.0
    } else {
        r2.sqrt() / (2.0 * std::f64::consts::PI * sigma * sigma)
    }
}

/// Semicircle CDF of variance `sigma²`.
pub fn semicircle_cdf(x: f64, sigma: f64) -> f64 {
    let t = (x / sigma).clamp(-2.0, 2.0);
    0.5 + t * (4.0 - t * t).sqrt() / (4.0 * std::f64::consts::PI) + (t / 2.0).asin() / std::f64::consts::PI
}

/// Inverse of [`semicircle_cdf`] by bisection; `p` in `[0, 1]`.
pub fn semicircle_quantile(p: f64, sigma: f64) -> f64 {
    let (mut lo, mut hi) = (-2.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if semicircle_cdf(mid, 1.0) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    sigma * 0.5 * (lo + hi)
}

/// Gaussian orthogonal ensemble scaled to the semicircle of variance
/// `sigma²`: off-diagonal entries `N(0, σ²/N)`, diagonal `N(0, 2σ²/N)`.
pub fn goe<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, rng);
    (&g + g.transpose()) * (sigma / (2.0 * n as f64).sqrt())
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of `diag R` absorbed).
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian_matrix(n, n, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `O D Oᵀ` with Haar `O` and `D` the semicircle quantiles at `(i − ½)/N`.
/// Every eigenvalue lies strictly inside `(−2σ, 2σ)`, and the first-order
/// self-energy is isotropic with `c = σ²`.
pub fn rotated_semicircle<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> DMatrix<f64> {
    let d = DVector::from_fn(n, |i, _| semicircle_quantile((i as f64 + 0.5) / n as f64, sigma));
    let o = haar_orthogonal(n, rng);
    let m = &o * DMatrix::from_diagonal(&d) * o.transpose();
    (&m + m.transpose()) * 0.5
}

/// Mean-zero risk Hessian of a random 2-hidden-layer ReLU network.
///
/// Widths are `d = n1 = n2 = w` with `w = ⌊√(n/2)⌋`, giving `2w² + w ≈ n`
/// parameters. Weights are small enough that every hinge term is active, and
/// labels are independent fair signs, so `l'_i = −y_i` and `E[H | x] = 0`.
pub fn centered_hessian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let w = ((n as f64 / 2.0).sqrt().floor() as usize).max(1);
    let params = NetworkParams::random(&[w, w, w], ActivationRule::ArgmaxMask01, 0.5, rng)?;
    let m = params.param_count();
    let samples = (0..m)
        .map(|_| {
            let x = DVector::from_fn(w, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Sample::new(x, y)
        })
        .collect::<Result<Vec<_>>>()?;
    let data = Dataset::new(samples)?;
    let h = risk_hessian(&params, LossL0::Hinge, &data)?.assemble();
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite Hessian entry".into()));
    }
    Ok(h)
}

/// Named ensembles accepted by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ensemble {
    Wigner,
    CenteredHessian,
}

impl Ensemble {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "wigner" => Some(Ensemble::Wigner),
            "centered-hessian" => Some(Ensemble::CenteredHessian),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        match self {
            Ensemble::Wigner => Ok(goe(n, 1.0, rng)),
            Ensemble::CenteredHessian => centered_hessian(n, rng),
        }
    }
}
