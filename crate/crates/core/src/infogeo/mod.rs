//! Exponential-family geometry on finite supports: log-partition functions,
//! neuron (expectation) coordinates, Legendre duals and Bregman divergences,
//! divergence contraction under stochastic maps, and the exact
//! log-likelihood decomposition of layered discrete models.

mod contraction;
mod likelihood;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub use contraction::{contraction_check, deformation_scenario, kl_divergence, ContractionModel, DeformationReport};
pub use likelihood::{
    decompose_likelihood, fp_bp_semantics_check, DecompositionReport, FpBpReport, LayeredModel, LayeredModelFile,
    MAX_JOINT_STATES,
};

/// How natural parameters are formed from the weights `θ` and a context `h`.
#[derive(Debug, Clone, PartialEq)]
pub enum Composition {
    /// `f(θ; h) = θ`.
    Identity,
    /// `f(θ; h) = Wᵀ h` with `θ = vec(W)` (column-major), `W` of shape
    /// `context_dim x stat_dim`.
    Linear { context_dim: usize },
}

/// `p(x | h) ∝ μ(x) exp(f(θ; h) · g(x))` over a finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFamilyModel {
    stats: Vec<DVector<f64>>,
    base: Vec<f64>,
    composition: Composition,
}

impl ExpFamilyModel {
    /// `stats[k] = g(x_k)`; `base[k] = μ(x_k) > 0`.
    pub fn new(stats: Vec<DVector<f64>>, base: Vec<f64>, composition: Composition) -> Result<Self> {
        let first = stats.first().ok_or_else(|| Error::Domain("support is empty".into()))?;
        let d = first.len();
        if stats.iter().any(|s| s.len() != d) {
            return Err(Error::Shape("sufficient statistics differ in length".into()));
        }
        if base.len() != stats.len() {
            return Err(Error::Shape(format!(
                "{} base weights for {} support points",
                base.len(),
                stats.len()
            )));
        }
        if base.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(Error::Domain("base measure must be positive and finite".into()));
        }
        for s in &stats {
            crate::error::ensure_finite(s.as_slice(), "sufficient statistic")?;
        }
        Ok(ExpFamilyModel {
            stats,
            base,
            composition,
        })
    }

    /// Uniform base measure.
    pub fn with_stats(stats: Vec<DVector<f64>>, composition: Composition) -> Result<Self> {
        let n = stats.len();
        Self::new(stats, vec![1.0; n], composition)
    }

    /// `{0, 1}` with `g(x) = x`: `ψ(θ) = ln(1 + e^θ)`.
    pub fn bernoulli() -> Self {
        Self::with_stats(
            vec![DVector::from_element(1, 0.0), DVector::from_element(1, 1.0)],
            Composition::Identity,
        )
        .expect("valid support")
    }

    pub fn stat_dim(&self) -> usize {
        self.stats[0].len()
    }

    pub fn support(&self) -> &[DVector<f64>] {
        &self.stats
    }

    /// Natural parameters `f(θ; h)`.
    pub fn natural(&self, theta: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.stat_dim();
        match self.composition {
            Composition::Identity => {
                if theta.len() != d {
                    return Err(Error::Shape(format!(
                        "θ of length {} for statistic dimension {d}",
                        theta.len()
                    )));
                }
                Ok(theta.clone())
            }
            Composition::Linear { context_dim } => {
                if theta.len() != context_dim * d || h.len() != context_dim {
                    return Err(Error::Shape(format!(
                        "θ of length {} and context of length {} for a {context_dim}x{d} weight",
                        theta.len(),
                        h.len()
                    )));
                }
                let w = DMatrix::from_column_slice(context_dim, d, theta.as_slice());
                Ok(w.tr_mul(h))
            }
        }
    }

    /// `ψ(f) = ln Σ_x μ(x) exp(f · g(x))`, evaluated with a shifted
    /// log-sum-exp.
    pub fn log_partition(&self, f: &DVector<f64>) -> Result<f64> {
        let (lse, _) = self.log_weights(f)?;
        Ok(lse)
    }

    fn log_weights(&self, f: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
        if f.len() != self.stat_dim() {
            return Err(Error::Shape(format!(
                "natural parameter of length {} for statistic dimension {}",
                f.len(),
                self.stat_dim()
            )));
        }
        let logs: Vec<f64> = self
            .stats
            .iter()
            .zip(&self.base)
            .map(|(g, b)| b.ln() + f.dot(g))
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Numeric(format!("log-partition diverges at {f:?}")));
        }
        let lse = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        if !lse.is_finite() {
            return Err(Error::Numeric("log-partition is not finite".into()));
        }
        Ok((lse, logs))
    }

    /// Normalized probabilities over the support.
    pub fn pmf(&self, f: &DVector<f64>) -> Result<Vec<f64>> {
        let (lse, logs) = self.log_weights(f)?;
        Ok(logs.iter().map(|l| (l - lse).exp()).collect())
    }

    /// `E[g]` under the normalized kernel.
    pub fn mean_stat(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.pmf(f)?;
        let mut eta = DVector::zeros(self.stat_dim());
        for (pk, g) in p.iter().zip(&self.stats) {
            eta += g * *pk;
        }
        Ok(eta)
    }

    /// `Cov[g]`, the Hessian of ψ.
    pub fn stat_covariance(&self, f: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = self.pmf(f)?;
        let eta = self.mean_stat(f)?;
        let d = self.stat_dim();
        let mut cov = DMatrix::zeros(d, d);
        for (pk, g) in p.iter().zip(&self.stats) {
            let c = g - &eta;
            cov += &c * c.transpose() * *pk;
        }
        Ok(cov)
    }
}

/// `η|_h = ∇ψ(f(θ; h)) = E[g | h]`, computed by differentiating ψ and by
/// direct expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeuronCoords {
    pub eta: Vec<f64>,
    /// Central-difference gradient of ψ in natural coordinates.
    pub eta_from_gradient: Vec<f64>,
    pub h_context: Vec<f64>,
}

/// Neuron coordinates of `model` at weights `θ` and context `h`; fails if
/// the two evaluation routes disagree by more than 1e-8.
pub fn neuron_coordinates(model: &ExpFamilyModel, theta: &DVector<f64>, h: &DVector<f64>) -> Result<NeuronCoords> {
    let f = model.natural(theta, h)?;
    let eta = model.mean_stat(&f)?;
    let step = 1e-5;
    let mut grad = DVector::zeros(f.len());
    for i in 0..f.len() {
        let mut up = f.clone();
        let mut down = f.clone();
        up[i] += step;
        down[i] -= step;
        grad[i] = (model.log_partition(&up)? - model.log_partition(&down)?) / (2.0 * step);
    }
    let gap = (&grad - &eta).amax();
    if gap > 1e-8 {
        return Err(Error::Numeric(format!(
            "gradient and expectation routes disagree by {gap:e}"
        )));
    }
    Ok(NeuronCoords {
        eta: eta.as_slice().to_vec(),
        eta_from_gradient: grad.as_slice().to_vec(),
        h_context: h.as_slice().to_vec(),
    })
}

/// A differentiable convex function on (part of) `R^d`.
pub trait ConvexPotential {
    fn dim(&self) -> usize;
    /// Fails with a domain error outside the potential's domain.
    fn value(&self, x: &DVector<f64>) -> Result<f64>;
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    /// Hessian; the default is a central difference of the gradient.
    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let step = 1e-6;
        let mut h = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut up = x.clone();
            let mut down = x.clone();
            up[j] += step;
            down[j] -= step;
            let col = (self.gradient(&up)? - self.gradient(&down)?) / (2.0 * step);
            h.set_column(j, &col);
        }
        Ok((&h + h.transpose()) * 0.5)
    }
}

fn check_dim(d: usize, x: &DVector<f64>) -> Result<()> {
    if x.len() != d {
        return Err(Error::Shape(format!(
            "point of length {} for a {d}-dimensional potential",
            x.len()
        )));
    }
    crate::error::ensure_finite(x.as_slice(), "point")
}

/// `‖x‖² / 2`, its own Legendre dual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub dim: usize,
}

impl ConvexPotential for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok(0.5 * x.norm_squared())
    }
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim, x)?;
        Ok(x.clone())
    }
    fn hessian(&self, _: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.dim, self.dim))
    }
}

/// Negative entropy of independent Bernoulli units,
/// `Σ η ln η + (1 − η) ln(1 − η)`; the dual of `Σ ln(1 + e^θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliNegEntropy {
    pub dim: usize,
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl BernoulliNegEntropy {
    fn check(&self, x: &DVector<f64>, open: bool) -> Result<()> {
        check_dim(self.dim, x)?;
        let bad = |v: f64| {
            if open {
                v <= 0.0 || v >= 1.0
            } else {
                !(0.0..=1.0).contains(&v)
            }
        };
        if let Some(v) = x.iter().find(|v| bad(**v)) {
            return Err(Error::Domain(format!("Bernoulli coordinate {v} outside its domain")));
        }
        Ok(())
    }
}

impl ConvexPotential for BernoulliNegEntropy {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x, false)?;
        Ok(x.iter().map(|v| xlogx(*v) + xlogx(1.0 - v)).sum())
    }
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x, true)?;
        Ok(x.map(|v| (v / (1.0 - v)).ln()))
    }
    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check(x, true)?;
        Ok(DMatrix::from_diagonal(&x.map(|v| 1.0 / (v * (1.0 - v)))))
    }
}

/// Log-partition of a finite-support family in natural coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPartition<'a> {
    pub model: &'a ExpFamilyModel,
}

impl ConvexPotential for LogPartition<'_> {
    fn dim(&self) -> usize {
        self.model.stat_dim()
    }
    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.model.log_partition(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.model.mean_stat(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.model.stat_covariance(x)
    }
}

/// Legendre dual `ψ*(η) = sup_θ θ·η − ψ(θ)`, evaluated by solving
/// `∇ψ(θ) = η` with a damped Newton iteration (tolerance 1e-10).
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotential<P> {
    pub primal: P,
    pub tol: f64,
    pub max_iter: usize,
}

impl<P: ConvexPotential> DualPotential<P> {
    pub fn new(primal: P) -> Self {
        DualPotential {
            primal,
            tol: 1e-10,
            max_iter: 200,
        }
    }

    /// The `θ` with `∇ψ(θ) = η`, i.e. `∇ψ*(η)`.
    pub fn solve(&self, eta: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.primal.dim();
        check_dim(d, eta)?;
        let objective = |t: &DVector<f64>| -> Result<f64> { Ok(self.primal.value(t)? - t.dot(eta)) };
        let mut theta = DVector::zeros(d);
        let mut phi = objective(&theta)?;
        for _ in 0..self.max_iter {
            let grad = self.primal.gradient(&theta)? - eta;
            if grad.amax() <= self.tol {
                return Ok(theta);
            }
            let mut hess = self.primal.hessian(&theta)?;
            // Levenberg safeguard for flat directions.
            let scale = hess.diagonal().amax().max(1e-300);
            for i in 0..d {
                hess[(i, i)] += 1e-12 * scale;
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => -ch.solve(&grad),
                None => -grad.clone(),
            };
            let slope = grad.dot(&step);
            let mut t = 1.0;
            loop {
                let cand = &theta + &step * t;
                if let Ok(v) = objective(&cand) {
                    // Near the optimum the objective decrease drops below
                    // rounding; a shrinking residual is accepted instead.
                    let shrinks = || {
                        self.primal
                            .gradient(&cand)
                            .is_ok_and(|g| (g - eta).amax() < 0.5 * grad.amax())
                    };
                    if v <= phi + 1e-4 * t * slope || shrinks() {
                        theta = cand;
                        phi = v;
                        break;
                    }
                }
                t *= 0.5;
                if t < 1e-20 {
                    return Err(Error::Domain(format!(
                        "no natural parameter maps to {:?}; point is outside the interior of the mean domain",
                        eta.as_slice()
                    )));
                }
            }
            if theta.amax() > 1e6 {
                return Err(Error::Domain(format!(
                    "{:?} is on or beyond the boundary of the mean domain",
                    eta.as_slice()
                )));
            }
        }
        Err(Error::Convergence {
            iterations: self.max_iter,
            residual: (self.primal.gradient(&theta)? - eta).amax(),
        })
    }
}

impl<P: ConvexPotential> ConvexPotential for DualPotential<P> {
    fn dim(&self) -> usize {
        self.primal.dim()
    }
    fn value(&self, eta: &DVector<f64>) -> Result<f64> {
        let theta = self.solve(eta)?;
        Ok(theta.dot(eta) - self.primal.value(&theta)?)
    }
    fn gradient(&self, eta: &DVector<f64>) -> Result<DVector<f64>> {
        self.solve(eta)
    }
    fn hessian(&self, eta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let theta = self.solve(eta)?;
        self.primal
            .hessian(&theta)?
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular primal Hessian".into()))
    }
}

/// `D_φ[x′ : x] = φ(x′) − φ(x) − ∇φ(x)·(x′ − x)`.
///
/// With `φ = ψ*` this is the neuron divergence between expectation
/// coordinates. Round-off negatives down to −1e-12 are reported as 0.
pub fn bregman_divergence<P: ConvexPotential + ?Sized>(
    potential: &P,
    x: &DVector<f64>,
    x_prime: &DVector<f64>,
) -> Result<f64> {
    if x == x_prime {
        potential.value(x)?;
        return Ok(0.0);
    }
    let d = potential.value(x_prime)? - potential.value(x)? - potential.gradient(x)?.dot(&(x_prime - x));
    if d < -1e-12 {
        return Err(Error::Numeric(format!(
            "negative Bregman divergence {d:e}; potential is not convex"
        )));
    }
    Ok(d.max(0.0))
}
