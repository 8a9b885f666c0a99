//! Random-matrix tools: the self-energy operator, a Matrix Dyson Equation
//! solver, Stieltjes inversion, empirical spectra and assumption diagnostics.

mod cumulant;
mod density;
pub mod ensembles;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::symmetric_op_norm;

pub use cumulant::{cumulant_diagnostics, CumulantReport};
pub use density::{
    empirical_esd, esd_from_eigenvalues, ks_distance, stieltjes_invert, support_bound_check, symmetry_check,
    SpectralDensity, SupportCheck, SupportPoints,
};

pub type C64 = Complex<f64>;

/// Linear sandwich map `R ↦ (1/N) E[W R W]` on `N x N` matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum SelfEnergy {
    /// `c · (tr R / N) · I`.
    Isotropic { c: f64 },
    /// `(1/m) Σ_i X_i R X_i` over stored centered fluctuations `X_i = H_i − Â`.
    Empirical {
        fluctuations: Vec<DMatrix<f64>>,
        mean: DMatrix<f64>,
    },
}

impl SelfEnergy {
    /// Centers the samples at their mean; needs at least one sample and a
    /// common square shape.
    pub fn empirical(samples: &[DMatrix<f64>]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Domain("empirical self-energy needs samples".into()))?;
        let n = first.nrows();
        for s in samples {
            if s.shape() != (n, n) {
                return Err(Error::Shape(format!(
                    "fluctuation sample of shape {:?}, expected {n}x{n}",
                    s.shape()
                )));
            }
            crate::error::ensure_finite(s.as_slice(), "fluctuation sample")?;
        }
        let mut mean = DMatrix::zeros(n, n);
        for s in samples {
            mean += s;
        }
        mean /= samples.len() as f64;
        let fluctuations = samples.iter().map(|s| s - &mean).collect();
        Ok(SelfEnergy::Empirical { fluctuations, mean })
    }

    fn dim(&self) -> Option<usize> {
        match self {
            SelfEnergy::Isotropic { .. } => None,
            SelfEnergy::Empirical { mean, .. } => Some(mean.nrows()),
        }
    }

    /// Applies the map to a real matrix.
    pub fn apply(&self, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(r.nrows(), r.ncols())?;
        let n = r.nrows();
        Ok(match self {
            SelfEnergy::Isotropic { c } => DMatrix::identity(n, n) * (c * r.trace() / n as f64),
            SelfEnergy::Empirical { fluctuations, .. } => {
                let mut out = DMatrix::zeros(n, n);
                for x in fluctuations {
                    out += x * r * x;
                }
                out / fluctuations.len() as f64
            }
        })
    }

    fn apply_complex(&self, r: &DMatrix<C64>) -> DMatrix<C64> {
        let n = r.nrows();
        match self {
            SelfEnergy::Isotropic { c } => DMatrix::identity(n, n) * (r.trace() * (*c / n as f64)),
            SelfEnergy::Empirical { fluctuations, .. } => {
                let mut out = DMatrix::zeros(n, n);
                for x in fluctuations {
                    let xc = x.map(|v| C64::new(v, 0.0));
                    out += &xc * r * &xc;
                }
                out / C64::new(fluctuations.len() as f64, 0.0)
            }
        }
    }

    fn check(&self, rows: usize, cols: usize) -> Result<()> {
        if rows != cols {
            return Err(Error::Shape(format!("self-energy of a {rows}x{cols} matrix")));
        }
        if let Some(n) = self.dim() {
            if n != rows {
                return Err(Error::Shape(format!(
                    "self-energy on {n}x{n} matrices applied to {rows}x{rows}"
                )));
            }
        }
        Ok(())
    }

    /// Norm induced by the operator norm on `N x N` matrices. For a
    /// positivity-preserving map this equals `‖S[I]‖` (Russo–Dye).
    pub fn norm(&self, n: usize) -> Result<f64> {
        symmetric_op_norm(&self.apply(&DMatrix::identity(n, n))?)
    }

    /// Smallest eigenvalue of `S[R]` over `trials` random PSD `R = G Gᵀ / n`.
    pub fn positivity_probe<R: Rng + ?Sized>(&self, n: usize, trials: usize, rng: &mut R) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for _ in 0..trials {
            let g = gaussian_matrix(n, n, rng);
            let r = &g * g.transpose() / n as f64;
            let s = self.apply(&r)?;
            let s = (&s + s.transpose()) * 0.5;
            let low = crate::numeric::symmetric_eigenvalues(&s)?[0];
            worst = worst.min(low);
        }
        Ok(worst)
    }

    /// Largest `‖S[aR+bQ] − aS[R] − bS[Q]‖_max` over random probes.
    pub fn linearity_probe<R: Rng + ?Sized>(&self, n: usize, trials: usize, rng: &mut R) -> Result<f64> {
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let r = gaussian_matrix(n, n, rng);
            let q = gaussian_matrix(n, n, rng);
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let lhs = self.apply(&(&r * a + &q * b))?;
            let rhs = self.apply(&r)? * a + self.apply(&q)? * b;
            worst = worst.max((lhs - rhs).abs().max());
        }
        Ok(worst)
    }
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Solver settings. Defaults: tolerance 1e-10, 10⁴ iterations per level,
/// damping 0.5 halved on residual increase down to 1/64.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub min_damping: f64,
    /// Ratio between successive `Im z` levels of the continuation.
    pub eta_ratio: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 10_000,
            damping: 0.5,
            min_damping: 1.0 / 64.0,
            eta_ratio: 4.0,
        }
    }
}

/// `I + (z − A + S[M]) M = 0` over a grid of spectral parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MDEProblem {
    pub a: DMatrix<f64>,
    pub self_energy: SelfEnergy,
    pub z_grid: Vec<C64>,
    pub options: SolverOptions,
}

impl MDEProblem {
    pub fn new(a: DMatrix<f64>, self_energy: SelfEnergy) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Shape(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        if a.is_empty() {
            return Err(Error::Shape("A is empty".into()));
        }
        crate::error::ensure_finite(a.as_slice(), "A")?;
        if a != a.transpose() {
            return Err(Error::Domain("A must be symmetric".into()));
        }
        self_energy.check(a.nrows(), a.ncols())?;
        if let SelfEnergy::Isotropic { c } = self_energy {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::Domain(format!(
                    "isotropic variance {c} must be finite and non-negative"
                )));
            }
        }
        Ok(MDEProblem {
            a,
            self_energy,
            z_grid: Vec::new(),
            options: SolverOptions::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn with_grid(mut self, z_grid: Vec<C64>) -> Self {
        self.z_grid = z_grid;
        self
    }

    /// Grid `E + iη` for the given energies.
    pub fn with_energies(self, energies: &[f64], eta: f64) -> Self {
        self.with_grid(energies.iter().map(|e| C64::new(*e, eta)).collect())
    }

    fn diagonal_fast_path(&self) -> Option<(DVector<f64>, f64)> {
        match self.self_energy {
            SelfEnergy::Isotropic { c } if self.a.is_diagonal() || self.dim() == 1 => Some((self.a.diagonal(), c)),
            _ => None,
        }
    }
}

trait IsDiagonal {
    fn is_diagonal(&self) -> bool;
}

impl IsDiagonal for DMatrix<f64> {
    fn is_diagonal(&self) -> bool {
        let n = self.nrows();
        (0..n).all(|j| (0..n).all(|i| i == j || self[(i, j)] == 0.0))
    }
}

/// Solution `M(z)`; diagonal when `A` is diagonal and `S` isotropic.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolvent {
    Diagonal(DVector<C64>),
    Dense(DMatrix<C64>),
}

impl Resolvent {
    pub fn to_dense(&self) -> DMatrix<C64> {
        match self {
            Resolvent::Diagonal(d) => DMatrix::from_diagonal(d),
            Resolvent::Dense(m) => m.clone(),
        }
    }

    /// `(1/N) tr M`.
    pub fn normalized_trace(&self) -> C64 {
        match self {
            Resolvent::Diagonal(d) => d.sum() / C64::new(d.len() as f64, 0.0),
            Resolvent::Dense(m) => m.trace() / C64::new(m.nrows() as f64, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MDEPoint {
    pub z: C64,
    pub m: Resolvent,
    /// `‖I + (z − A + S[M]) M‖_F`.
    pub residual: f64,
    /// Smallest eigenvalue of `Im M = (M − M*)/2i`.
    pub im_min_eig: f64,
    /// Fixed-point iterations summed over continuation levels.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MDESolution {
    pub points: Vec<MDEPoint>,
}

impl MDESolution {
    /// `(1/N) tr M(z)` at every grid point, in grid order.
    pub fn stieltjes(&self) -> Vec<C64> {
        self.points.iter().map(|p| p.m.normalized_trace()).collect()
    }

    pub fn point(&self, z: C64) -> Option<&MDEPoint> {
        self.points.iter().find(|p| same_z(p.z, z))
    }
}

pub(crate) fn same_z(a: C64, b: C64) -> bool {
    let scale = 1.0f64.max(a.norm()).max(b.norm());
    (a - b).norm() <= 1e-12 * scale
}

/// Solves the MDE at every grid point by damped fixed-point iteration
/// `M ← (1−γ)M + γ[−(z − A + S[M])⁻¹]` with Anderson mixing, continuing
/// each point from `Im z = 1` down to its target imaginary part with warm
/// starts.
pub fn solve_mde(problem: &MDEProblem) -> Result<MDESolution> {
    if let Some(z) = problem.z_grid.iter().find(|z| !(z.im > 0.0) || !z.re.is_finite()) {
        return Err(Error::Domain(format!("spectral parameter {z} must have Im z > 0")));
    }
    let points = problem
        .z_grid
        .par_iter()
        .map(|&z| solve_point(problem, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(MDESolution { points })
}

fn eta_levels(target: f64, ratio: f64) -> Vec<f64> {
    let mut levels = Vec::new();
    let mut eta = 1.0f64;
    while eta > target {
        levels.push(eta);
        eta /= ratio;
    }
    levels.push(target);
    levels
}

fn solve_point(problem: &MDEProblem, z: C64) -> Result<MDEPoint> {
    let opts = &problem.options;
    let levels = eta_levels(z.im, opts.eta_ratio);
    if let Some((diag, c)) = problem.diagonal_fast_path() {
        let z0 = C64::new(z.re, levels[0]);
        let mut m: DVector<C64> = diag.map(|a| C64::new(1.0, 0.0) / (C64::new(a, 0.0) - z0));
        let mut total = 0;
        let mut residual = f64::NAN;
        for eta in levels {
            let zl = C64::new(z.re, eta);
            let (next, res, it) = iterate_diagonal(&diag, c, zl, m, opts)?;
            m = next;
            residual = res;
            total += it;
        }
        let im_min_eig = m.iter().fold(f64::INFINITY, |acc, v| acc.min(v.im));
        check_positive(z, im_min_eig)?;
        return Ok(MDEPoint {
            z,
            m: Resolvent::Diagonal(m),
            residual,
            im_min_eig,
            iterations: total,
        });
    }

    let n = problem.dim();
    let ac = problem.a.map(|v| C64::new(v, 0.0));
    let eye = DMatrix::<C64>::identity(n, n);
    let z0 = C64::new(z.re, levels[0]);
    let mut m = (&ac - &eye * z0)
        .try_inverse()
        .ok_or_else(|| Error::Numeric("A − z is singular".into()))?;
    let mut total = 0;
    let mut residual = f64::NAN;
    for eta in levels {
        let zl = C64::new(z.re, eta);
        let (next, res, it) = iterate_dense(problem, &ac, zl, m, opts)?;
        m = next;
        residual = res;
        total += it;
    }
    let im = (&m - m.adjoint()) * C64::new(0.0, -0.5);
    let im_min_eig = im
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(*v));
    check_positive(z, im_min_eig)?;
    Ok(MDEPoint {
        z,
        m: Resolvent::Dense(m),
        residual,
        im_min_eig,
        iterations: total,
    })
}

fn check_positive(z: C64, im_min_eig: f64) -> Result<()> {
    if im_min_eig > 0.0 {
        Ok(())
    } else {
        Err(Error::Stability(format!(
            "Im M lost positivity at z = {z} (smallest eigenvalue {im_min_eig:e})"
        )))
    }
}

/// Depth of the Anderson mixing history.
const ANDERSON_DEPTH: usize = 5;

/// Damped fixed-point iteration `x ← (1−γ)x + γF(x)` with Anderson mixing
/// over the last few steps. `step` returns `F(x)` and the residual of `x`.
/// A residual increase halves `γ` (down to the floor) and clears the mixing
/// history; a mixed iterate that fails `admissible` falls back to the plain
/// damped step.
fn fixed_point(
    z: C64,
    mut x: Vec<C64>,
    opts: &SolverOptions,
    step: impl Fn(&[C64]) -> Result<(Vec<C64>, f64)>,
    admissible: impl Fn(&[C64]) -> bool,
) -> Result<(Vec<C64>, f64, usize)> {
    let mut gamma = opts.damping;
    let mut prev = f64::INFINITY;
    let mut hist: std::collections::VecDeque<(Vec<C64>, Vec<C64>)> = Default::default();
    let mut last: Option<(Vec<C64>, Vec<C64>)> = None;
    for it in 0..opts.max_iter {
        let (fx, residual) = step(&x)?;
        if !residual.is_finite() {
            return Err(Error::Numeric(format!("non-finite residual at z = {z}")));
        }
        if residual <= opts.tol {
            return Ok((x, residual, it));
        }
        if residual > prev {
            gamma = (gamma * 0.5).max(opts.min_damping);
            hist.clear();
            last = None;
        }
        prev = residual;
        let g: Vec<C64> = x.iter().zip(&fx).map(|(x, f)| x * (1.0 - gamma) + f * gamma).collect();
        let f: Vec<C64> = g.iter().zip(&x).map(|(g, x)| g - x).collect();
        if let Some((g0, f0)) = last.take() {
            let df: Vec<C64> = f.iter().zip(&f0).map(|(a, b)| a - b).collect();
            let dg: Vec<C64> = g.iter().zip(&g0).map(|(a, b)| a - b).collect();
            if hist.len() == ANDERSON_DEPTH {
                hist.pop_front();
            }
            hist.push_back((dg, df));
        }
        last = Some((g.clone(), f.clone()));
        x = match anderson(&g, &f, &hist) {
            Some(mixed) if admissible(&mixed) => mixed,
            _ => {
                hist.clear();
                g
            }
        };
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        residual: prev,
    })
}

/// `g − ΔG α` with `α` minimizing `‖f − ΔF α‖` (regularized normal equations).
fn anderson(g: &[C64], f: &[C64], hist: &std::collections::VecDeque<(Vec<C64>, Vec<C64>)>) -> Option<Vec<C64>> {
    let k = hist.len();
    if k == 0 {
        return None;
    }
    let dot = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(a, b)| a.conj() * b).sum::<C64>();
    let mut gram = DMatrix::<C64>::from_fn(k, k, |i, j| dot(&hist[i].1, &hist[j].1));
    let scale = (0..k).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    for i in 0..k {
        gram[(i, i)] += C64::new(1e-12 * scale, 0.0);
    }
    let rhs = DVector::<C64>::from_fn(k, |i, _| dot(&hist[i].1, f));
    let alpha = gram.lu().solve(&rhs)?;
    let mut out = g.to_vec();
    for (j, (dg, _)) in hist.iter().enumerate() {
        for (o, d) in out.iter_mut().zip(dg) {
            *o -= alpha[j] * d;
        }
    }
    out.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(out)
}

fn iterate_diagonal(
    diag: &DVector<f64>,
    c: f64,
    z: C64,
    m: DVector<C64>,
    opts: &SolverOptions,
) -> Result<(DVector<C64>, f64, usize)> {
    let n = diag.len() as f64;
    let step = |m: &[C64]| -> Result<(Vec<C64>, f64)> {
        let shift = z + m.iter().sum::<C64>() * (c / n);
        let k: Vec<C64> = diag.iter().map(|a| shift - a).collect();
        let residual = k
            .iter()
            .zip(m)
            .map(|(k, m)| (C64::new(1.0, 0.0) + k * m).norm_sqr())
            .sum::<f64>()
            .sqrt();
        Ok((k.iter().map(|k| -C64::new(1.0, 0.0) / k).collect(), residual))
    };
    let positive = |m: &[C64]| m.iter().all(|v| v.im > 0.0);
    let (m, res, it) = fixed_point(z, m.as_slice().to_vec(), opts, step, positive)?;
    Ok((DVector::from_vec(m), res, it))
}

fn iterate_dense(
    problem: &MDEProblem,
    ac: &DMatrix<C64>,
    z: C64,
    m: DMatrix<C64>,
    opts: &SolverOptions,
) -> Result<(DMatrix<C64>, f64, usize)> {
    let n = ac.nrows();
    let eye = DMatrix::<C64>::identity(n, n);
    let step = |m: &[C64]| -> Result<(Vec<C64>, f64)> {
        let m = DMatrix::from_column_slice(n, n, m);
        let k = &eye * z - ac + problem.self_energy.apply_complex(&m);
        let residual = (&eye + &k * &m).norm();
        if !residual.is_finite() {
            return Ok((m.as_slice().to_vec(), residual));
        }
        let f = k
            .try_inverse()
            .ok_or_else(|| Error::Numeric(format!("z − A + S[M] singular at z = {z}")))?;
        Ok(((-f).as_slice().to_vec(), residual))
    };
    // Necessary condition for Im M ≻ 0; the full check runs once at the end.
    let positive = |m: &[C64]| (0..n).all(|i| m[i * n + i].im > 0.0);
    let (m, res, it) = fixed_point(z, m.as_slice().to_vec(), opts, step, positive)?;
    Ok((DMatrix::from_column_slice(n, n, &m), res, it))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn wigner_m(z: C64) -> C64 {
        // Root of m² + z m + 1 = 0 with Im m > 0.
        let s = (z * z - 4.0).sqrt();
        let r1 = (-z + s) / 2.0;
        if r1.im > 0.0 {
            r1
        } else {
            (-z - s) / 2.0
        }
    }

    #[test]
    fn isotropic_identity_and_scalar() {
        let s = SelfEnergy::Isotropic { c: 1.0 };
        assert_eq!(s.apply(&DMatrix::identity(3, 3)).unwrap(), DMatrix::identity(3, 3));
        let e = SelfEnergy::empirical(&[DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, -2.0)]).unwrap();
        // variance 4
        assert_eq!(e.apply(&DMatrix::from_element(1, 1, 1.0)).unwrap()[(0, 0)], 4.0);
        assert!(matches!(e.apply(&DMatrix::identity(2, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn wigner_scalar_matches_closed_form() {
        let zs: Vec<C64> = [-2.5, -1.0, 0.0, 0.7, 1.99, 3.0]
            .iter()
            .map(|e| C64::new(*e, 1e-2))
            .collect();
        let p = MDEProblem::new(DMatrix::zeros(1, 1), SelfEnergy::Isotropic { c: 1.0 })
            .unwrap()
            .with_grid(zs.clone());
        let sol = solve_mde(&p).unwrap();
        for (z, m) in zs.iter().zip(sol.stieltjes()) {
            assert!((m - wigner_m(*z)).norm() < 1e-9, "z={z}: {m} vs {}", wigner_m(*z));
        }
    }

    #[test]
    fn dense_path_agrees_with_diagonal_path() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5, 2.0]));
        let zs = vec![C64::new(0.3, 0.05), C64::new(-1.2, 0.2)];
        let diag = MDEProblem::new(a.clone(), SelfEnergy::Isotropic { c: 0.7 })
            .unwrap()
            .with_grid(zs.clone());
        let d = solve_mde(&diag).unwrap();
        // A rotated copy of A has the same MDE trace but is not diagonal.
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let q = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let mut ar = &q * &a * q.transpose();
        ar = (&ar + ar.transpose()) * 0.5;
        let dense = MDEProblem::new(ar, SelfEnergy::Isotropic { c: 0.7 })
            .unwrap()
            .with_grid(zs.clone());
        assert!(dense.diagonal_fast_path().is_none());
        let s = solve_mde(&dense).unwrap();
        for (x, y) in d.stieltjes().iter().zip(s.stieltjes()) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_self_energy_is_resolvent() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -1.0]);
        let z = C64::new(0.2, 0.1);
        let p = MDEProblem::new(a.clone(), SelfEnergy::Isotropic { c: 0.0 })
            .unwrap()
            .with_grid(vec![z]);
        let sol = solve_mde(&p).unwrap();
        let exact = (a.map(|v| C64::new(v, 0.0)) - DMatrix::identity(2, 2) * z)
            .try_inverse()
            .unwrap();
        // ‖M − (A−z)⁻¹‖ ≤ ‖(A−z)⁻¹‖ · residual
        let bound = 20.0 * sol.points[0].residual;
        assert!((sol.points[0].m.to_dense() - exact).norm() <= bound);
    }

    #[test]
    fn rejects_real_axis_and_asymmetric_a() {
        let p = MDEProblem::new(DMatrix::zeros(1, 1), SelfEnergy::Isotropic { c: 1.0 })
            .unwrap()
            .with_grid(vec![C64::new(0.0, 0.0)]);
        assert!(matches!(solve_mde(&p), Err(Error::Domain(_))));
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(MDEProblem::new(a, SelfEnergy::Isotropic { c: 1.0 }).is_err());
    }

    #[test]
    fn convergence_error_carries_residual() {
        let mut p = MDEProblem::new(DMatrix::zeros(1, 1), SelfEnergy::Isotropic { c: 1.0 })
            .unwrap()
            .with_grid(vec![C64::new(2.0, 1e-6)]);
        p.options.max_iter = 3;
        match solve_mde(&p) {
            Err(Error::Convergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn probes_on_empirical_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<DMatrix<f64>> = (0..20)
            .map(|_| {
                let g = gaussian_matrix(4, 4, &mut rng);
                (&g + g.transpose()) * 0.5
            })
            .collect();
        let s = SelfEnergy::empirical(&samples).unwrap();
        assert!(s.positivity_probe(4, 100, &mut rng).unwrap() >= -1e-12);
        assert!(s.linearity_probe(4, 20, &mut rng).unwrap() <= 1e-10);
    }
}
