//! Exact risk Hessian of a single-output network under a piecewise-linear loss.
//!
//! Parameter groups are `vec(W_1), ..., vec(W_{L-1}), alpha` (column-major).
//! Because the loss is piecewise linear and every group enters the score
//! linearly, each diagonal block vanishes and the off-diagonal block for
//! groups `p < q` factors as
//!
//! ```text
//! H_qp = l' * g_q  ⊗  P_pq^T  ⊗  a_{p-1}^T
//! ```
//!
//! with `g_q` the back-propagated vector built from `h'' = h' ⊙ h'`, `P_pq`
//! the activation path `dg(h'_p) W_{p+1} dg(h'_{p+1}) ... W_{q-1} dg(h'_{q-1})`
//! and `a_{p-1}` the forward activation entering group `p`. The output vector
//! `alpha` is the last group with `g = [1]`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::net::{forward, loss, Dataset, LossL0, NetworkParams, Sample};
use crate::numeric::{pairwise_sum, symmetric_eigenvalues, symmetric_op_norm};
use crate::poset::LayerState;

/// Preactivations closer than this to zero mark a sample as sitting on a kink.
pub const KINK_TOL: f64 = 1e-9;

/// Strictly lower block structure of a symmetric Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlocks {
    dims: Vec<usize>,
    /// `(p, q)` with `p < q` maps to a `dims[q] x dims[p]` matrix.
    blocks: BTreeMap<(usize, usize), DMatrix<f64>>,
}

impl HessianBlocks {
    pub fn zeros(dims: &[usize]) -> Self {
        let mut blocks = BTreeMap::new();
        for q in 0..dims.len() {
            for p in 0..q {
                blocks.insert((p, q), DMatrix::zeros(dims[q], dims[p]));
            }
        }
        HessianBlocks {
            dims: dims.to_vec(),
            blocks,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Block `H_qp` for `p < q`.
    pub fn block(&self, p: usize, q: usize) -> Option<&DMatrix<f64>> {
        self.blocks.get(&(p, q))
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&(usize, usize), &DMatrix<f64>)> {
        self.blocks.iter()
    }

    /// Full symmetric matrix; diagonal blocks are zero and the upper
    /// triangle is an exact mirror of the lower one.
    pub fn assemble(&self) -> DMatrix<f64> {
        let n = self.dim();
        let offsets: Vec<usize> = self
            .dims
            .iter()
            .scan(0, |acc, d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect();
        let mut full = DMatrix::zeros(n, n);
        for (&(p, q), b) in &self.blocks {
            let (r0, c0) = (offsets[q], offsets[p]);
            for c in 0..b.ncols() {
                for r in 0..b.nrows() {
                    full[(r0 + r, c0 + c)] = b[(r, c)];
                    full[(c0 + c, r0 + r)] = b[(r, c)];
                }
            }
        }
        full
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|b| b.iter().all(|v| *v == 0.0))
    }

    fn scale(&mut self, s: f64) {
        for b in self.blocks.values_mut() {
            *b *= s;
        }
    }

    fn add_assign(&mut self, other: &HessianBlocks) {
        for (k, b) in self.blocks.iter_mut() {
            *b += &other.blocks[k];
        }
    }
}

/// Second derivative of the score alone (the loss derivative factored out).
fn score_hessian(params: &NetworkParams, states: &[LayerState]) -> HessianBlocks {
    let nw = params.weights.len();
    let dims = params.group_sizes();
    let mut out = HessianBlocks::zeros(&dims);

    // Back-propagated vectors with h'' in place of h'; the output group gets [1].
    let mut back = vec![DVector::zeros(0); nw + 1];
    back[nw] = DVector::from_element(1, 1.0);
    let mut g = states[nw - 1].h_second.component_mul(&params.alpha);
    back[nw - 1] = g.clone();
    for k in (0..nw - 1).rev() {
        g = states[k].h_second.component_mul(&(&params.weights[k + 1] * &g));
        back[k] = g.clone();
    }

    for p in 0..nw {
        let a = &states[p].t_in;
        let in_p = a.len();
        let mut path = DMatrix::from_diagonal(&states[p].h_prime);
        for q in p + 1..=nw {
            if q > p + 1 {
                let mut next = &path * &params.weights[q - 1];
                for (c, d) in states[q - 1].h_prime.iter().enumerate() {
                    next.column_mut(c).scale_mut(*d);
                }
                path = next;
            }
            // path is n_p x in_q where in_q is the input width of group q.
            let in_q = path.ncols();
            let block = out.blocks.get_mut(&(p, q)).unwrap();
            for (l, gl) in back[q].iter().enumerate() {
                if *gl == 0.0 {
                    continue;
                }
                for k in 0..in_q {
                    let row = l * in_q + k;
                    for j in 0..path.nrows() {
                        let pjk = path[(j, k)];
                        if pjk == 0.0 {
                            continue;
                        }
                        let coef = gl * pjk;
                        for (i, ai) in a.iter().enumerate() {
                            block[(row, j * in_p + i)] = coef * ai;
                        }
                    }
                }
            }
        }
    }
    out
}

fn has_kink(states: &[LayerState]) -> bool {
    states.iter().any(|s| s.h_hat.iter().any(|v| v.abs() < KINK_TOL))
}

/// Hessian of one sample's loss.
pub fn sample_hessian(params: &NetworkParams, l: LossL0, sample: &Sample) -> Result<HessianBlocks> {
    let (score, states) = forward(params, &sample.x)?;
    let (_, lp) = loss(l, score, sample.y);
    if lp == 0.0 {
        return Ok(HessianBlocks::zeros(&params.group_sizes()));
    }
    let mut h = score_hessian(params, &states);
    h.scale(lp);
    Ok(h)
}

fn check_dataset(params: &NetworkParams, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Domain("empty dataset".into()));
    }
    if data.input_dim() != Some(params.input_dim()) {
        return Err(Error::Shape(format!(
            "dataset dimension {:?} does not match network input {}",
            data.input_dim(),
            params.input_dim()
        )));
    }
    Ok(())
}

// Fixed-split tree reduction: the summation order depends only on the
// sample count, never on the thread schedule.
fn tree_sum(params: &NetworkParams, l: LossL0, samples: &[Sample]) -> Result<HessianBlocks> {
    if samples.len() == 1 {
        return sample_hessian(params, l, &samples[0]);
    }
    let mid = samples.len() / 2;
    let (left, right) = rayon::join(
        || tree_sum(params, l, &samples[..mid]),
        || tree_sum(params, l, &samples[mid..]),
    );
    let mut left = left?;
    left.add_assign(&right?);
    Ok(left)
}

/// Empirical-risk Hessian `(1/m) Σ_i H_i`.
pub fn risk_hessian(params: &NetworkParams, l: LossL0, data: &Dataset) -> Result<HessianBlocks> {
    check_dataset(params, data)?;
    let mut h = tree_sum(params, l, data.samples())?;
    h.scale(1.0 / data.len() as f64);
    Ok(h)
}

/// Share of eigenvalues below `-tol` among those with `|λ| > tol`, where
/// `tol = 1e-8 * max|λ|`. Zero for the zero matrix.
pub fn neg_fraction(eigs: &[f64]) -> f64 {
    let norm = eigs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if norm == 0.0 {
        return 0.0;
    }
    let tol = 1e-8 * norm;
    let nonzero = eigs.iter().filter(|v| v.abs() > tol).count();
    let neg = eigs.iter().filter(|v| **v < -tol).count();
    neg as f64 / nonzero as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeReport {
    pub risk: f64,
    /// Mean of `|l'|` over the samples.
    pub mean_lprime: f64,
    /// Largest per-sample operator norm of the score Hessian.
    pub lambda0: f64,
    pub op_norm: f64,
    /// `mean_lprime * lambda0`.
    pub bound: f64,
    pub eigs: Vec<f64>,
    pub neg_fraction: f64,
    /// Indices of samples with a preactivation within [`KINK_TOL`] of zero.
    pub kink_samples: Vec<usize>,
}

impl LandscapeReport {
    pub fn bound_holds(&self) -> bool {
        self.op_norm <= self.bound + 1e-9
    }
}

/// Spectrum of the risk Hessian together with the `‖H‖ ≤ E|l'| λ0` bound.
pub fn landscape_report(params: &NetworkParams, l: LossL0, data: &Dataset) -> Result<LandscapeReport> {
    check_dataset(params, data)?;
    struct PerSample {
        loss: f64,
        abs_lprime: f64,
        norm: f64,
        kink: bool,
    }
    let per: Vec<PerSample> = data
        .samples()
        .par_iter()
        .map(|s| {
            let (score, states) = forward(params, &s.x)?;
            let (value, lp) = loss(l, score, s.y);
            let norm = symmetric_op_norm(&score_hessian(params, &states).assemble())?;
            Ok(PerSample {
                loss: value,
                abs_lprime: lp.abs(),
                norm,
                kink: has_kink(&states),
            })
        })
        .collect::<Result<_>>()?;
    let m = data.len() as f64;
    let risk = pairwise_sum(&per.iter().map(|p| p.loss).collect::<Vec<_>>()) / m;
    let mean_lprime = pairwise_sum(&per.iter().map(|p| p.abs_lprime).collect::<Vec<_>>()) / m;
    let lambda0 = per.iter().fold(0.0f64, |a, p| a.max(p.norm));
    let kink_samples = per.iter().enumerate().filter(|(_, p)| p.kink).map(|(i, _)| i).collect();

    let h = risk_hessian(params, l, data)?.assemble();
    let eigs = symmetric_eigenvalues(&h)?;
    let op_norm = eigs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(LandscapeReport {
        risk,
        mean_lprime,
        lambda0,
        op_norm,
        bound: mean_lprime * lambda0,
        neg_fraction: neg_fraction(&eigs),
        eigs,
        kink_samples,
    })
}
