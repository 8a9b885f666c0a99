use nalgebra::DMatrix;
use serde::Serialize;

use super::{MDESolution, SelfEnergy, C64};
use crate::error::{Error, Result};
use crate::numeric::{cumulative_trapezoid, symmetric_eigenvalues, trapezoid};

/// Density samples on an energy grid: either a smoothed Stieltjes inversion
/// (`eta` set) or a normalized histogram (`bin_width` set, grid = bin centres).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDensity {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub eta: Option<f64>,
    pub bin_width: Option<f64>,
}

impl SpectralDensity {
    /// Total mass: rectangle sum for histograms, trapezoid otherwise.
    pub fn mass(&self) -> f64 {
        match self.bin_width {
            Some(w) => self.density.iter().sum::<f64>() * w,
            None => trapezoid(&self.grid, &self.density),
        }
    }

    /// Cumulative distribution by trapezoid integration, linearly
    /// interpolated between grid points and clamped to [0, 1].
    pub fn cdf(&self) -> impl Fn(f64) -> f64 + '_ {
        let cum = cumulative_trapezoid(&self.grid, &self.density);
        move |x: f64| {
            let g = &self.grid;
            if g.is_empty() || x <= g[0] {
                return 0.0;
            }
            if x >= g[g.len() - 1] {
                return cum[cum.len() - 1].min(1.0);
            }
            let k = g.partition_point(|v| *v <= x) - 1;
            let t = (x - g[k]) / (g[k + 1] - g[k]);
            let (y0, y1) = (self.density[k], self.density[k + 1]);
            // Exact integral of the linear interpolant over [g_k, x].
            let part = (x - g[k]) * (y0 + 0.5 * t * (y1 - y0));
            (cum[k] + part).clamp(0.0, 1.0)
        }
    }
}

/// `ρ(E) = Im m(E + iη) / π` from a solved grid. Negative values above
/// `-1e-8` are clipped to 0; anything more negative is a numeric error.
pub fn stieltjes_invert(solution: &MDESolution, grid: &[f64], eta: f64) -> Result<SpectralDensity> {
    let mut density = Vec::with_capacity(grid.len());
    for &e in grid {
        let z = C64::new(e, eta);
        let point = solution
            .point(z)
            .ok_or_else(|| Error::Domain(format!("solution has no grid point at z = {z}")))?;
        let rho = point.m.normalized_trace().im / std::f64::consts::PI;
        if rho < -1e-8 {
            return Err(Error::Numeric(format!("negative density {rho:e} at E = {e}")));
        }
        density.push(rho.max(0.0));
    }
    Ok(SpectralDensity {
        grid: grid.to_vec(),
        density,
        eta: Some(eta),
        bin_width: None,
    })
}

/// Normalized eigenvalue histogram with `bins` equal bins over `range`
/// (default: the eigenvalue span, or a unit window around a single value).
pub fn esd_from_eigenvalues(eigs: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<SpectralDensity> {
    if bins == 0 {
        return Err(Error::Domain("histogram needs at least one bin".into()));
    }
    if eigs.is_empty() {
        return Err(Error::Domain("no eigenvalues".into()));
    }
    crate::error::ensure_finite(eigs, "eigenvalues")?;
    let (lo, hi) = match range {
        Some((lo, hi)) if hi > lo => (lo, hi),
        Some(_) => return Err(Error::Domain("histogram range must be increasing".into())),
        None => {
            let lo = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        }
    };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in eigs {
        if v < lo || v > hi {
            return Err(Error::Domain(format!(
                "eigenvalue {v} outside histogram range [{lo}, {hi}]"
            )));
        }
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = eigs.len() as f64;
    Ok(SpectralDensity {
        grid: (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect(),
        density: counts.iter().map(|c| *c as f64 / (n * width)).collect(),
        eta: None,
        bin_width: Some(width),
    })
}

/// Empirical spectral distribution of a symmetric matrix as a histogram.
pub fn empirical_esd(matrix: &DMatrix<f64>, bins: usize) -> Result<SpectralDensity> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::Shape(format!(
            "ESD of a {}x{} matrix",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix != &matrix.transpose() {
        return Err(Error::Domain("ESD input must be symmetric".into()));
    }
    esd_from_eigenvalues(&symmetric_eigenvalues(matrix)?, bins, None)
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `values` and `cdf`.
pub fn ks_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut worst = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        worst = worst.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    worst
}

/// `max |ρ(E) − ρ(−E)|`; the grid must be symmetric about 0.
pub fn symmetry_check(density: &SpectralDensity) -> Result<f64> {
    let g = &density.grid;
    let n = g.len();
    let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..n {
        if (g[i] + g[n - 1 - i]).abs() > 1e-12 * scale {
            return Err(Error::Domain(format!(
                "grid is not symmetric about 0: {} vs {}",
                g[i],
                g[n - 1 - i]
            )));
        }
    }
    Ok((0..n)
        .map(|i| (density.density[i] - density.density[n - 1 - i]).abs())
        .fold(0.0, f64::max))
}

/// What to test against the support interval.
#[derive(Debug, Clone, Copy)]
pub enum SupportPoints<'a> {
    Eigenvalues(&'a [f64]),
    /// Grid points with `ρ > η^{2/3}/π` count as support.
    Density(&'a SpectralDensity),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportCheck {
    /// `‖S‖` induced by the operator norm.
    pub s_norm: f64,
    /// `2‖S‖^{1/2}`.
    pub radius: f64,
    /// Allowed slack beyond the radius: 1e-6, plus `3η^{2/3}` for densities.
    pub inflation: f64,
    /// Merged intervals `Spec A + [−radius, radius]`.
    pub intervals: Vec<(f64, f64)>,
    /// Largest distance of a tested point outside the merged intervals (0 if none).
    pub max_excess: f64,
    pub points_tested: usize,
    pub holds: bool,
}

/// Checks `supp ⊂ Spec A + [−2‖S‖^{1/2}, 2‖S‖^{1/2}]` up to the inflation.
pub fn support_bound_check(points: SupportPoints<'_>, a: &DMatrix<f64>, s: &SelfEnergy) -> Result<SupportCheck> {
    let n = a.nrows();
    let spec = symmetric_eigenvalues(a)?;
    let s_norm = s.norm(n)?;
    let radius = 2.0 * s_norm.sqrt();
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for &l in &spec {
        let (lo, hi) = (l - radius, l + radius);
        match intervals.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => intervals.push((lo, hi)),
        }
    }
    let (tested, inflation): (Vec<f64>, f64) = match points {
        SupportPoints::Eigenvalues(e) => (e.to_vec(), 1e-6),
        SupportPoints::Density(d) => {
            let eta = d.eta.unwrap_or(0.0);
            let floor = eta.powf(2.0 / 3.0) / std::f64::consts::PI;
            let pts = d
                .grid
                .iter()
                .zip(&d.density)
                .filter(|(_, r)| **r > floor)
                .map(|(e, _)| *e)
                .collect();
            (pts, 1e-6 + 3.0 * eta.powf(2.0 / 3.0))
        }
    };
    let excess = |x: f64| {
        intervals
            .iter()
            .map(|(lo, hi)| (lo - x).max(x - hi).max(0.0))
            .fold(f64::INFINITY, f64::min)
    };
    let max_excess = tested.iter().map(|x| excess(*x)).fold(0.0, f64::max);
    Ok(SupportCheck {
        s_norm,
        radius,
        inflation,
        intervals,
        max_excess,
        points_tested: tested.len(),
        holds: max_excess <= inflation,
    })
}
