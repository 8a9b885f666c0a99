//! Single-output networks `T(x) = x^T prod_i W_i dg(h_i) alpha`, piecewise-linear
//! losses, empirical risk and its gradient.
//!
//! Parameters are flattened as `vec(W_1), ..., vec(W_{L-1}), alpha` with
//! column-major `vec`, which is also nalgebra's storage order.

mod data;
mod loss;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::poset::{ActivationRule, Field, KernelSpec, LayerEntry, LayerState, SystemFile};

pub use data::{Dataset, Sample};
pub use loss::{kink_distance, loss, LossL0};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// `W_1 ... W_{L-1}`; `W_i` is `n_{i-1} x n_i`.
    pub weights: Vec<DMatrix<f64>>,
    pub alpha: DVector<f64>,
    pub rule: ActivationRule,
}

impl NetworkParams {
    pub fn new(weights: Vec<DMatrix<f64>>, alpha: DVector<f64>, rule: ActivationRule) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Shape("network needs at least one weight matrix".into()));
        }
        for (i, pair) in weights.windows(2).enumerate() {
            if pair[0].ncols() != pair[1].nrows() {
                return Err(Error::Shape(format!(
                    "W{} has {} columns but W{} has {} rows",
                    i + 1,
                    pair[0].ncols(),
                    i + 2,
                    pair[1].nrows()
                )));
            }
        }
        let last = weights.last().unwrap();
        if last.ncols() != alpha.len() {
            return Err(Error::Shape(format!(
                "last weight has {} columns but alpha has length {}",
                last.ncols(),
                alpha.len()
            )));
        }
        Ok(NetworkParams { weights, alpha, rule })
    }

    /// Gaussian weights with standard deviation `scale / sqrt(fan_in)`.
    ///
    /// `widths = [n_0, n_1, ..., n_{L-1}]`; alpha has length `n_{L-1}`.
    pub fn random<R: Rng + ?Sized>(widths: &[usize], rule: ActivationRule, scale: f64, rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Shape("need at least input and one hidden width".into()));
        }
        let mut gauss = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect() };
        let weights = widths
            .windows(2)
            .map(|w| {
                let s = scale / (w[0] as f64).sqrt();
                DMatrix::from_vec(w[0], w[1], gauss(w[0] * w[1])) * s
            })
            .collect();
        let last = *widths.last().unwrap();
        let alpha = DVector::from_vec(gauss(last)) * (scale / (last as f64).sqrt());
        NetworkParams::new(weights, alpha, rule)
    }

    /// Number of layers `L` (hidden layers plus the output).
    pub fn depth(&self) -> usize {
        self.weights.len() + 1
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    /// Sizes of the parameter groups `vec(W_1), ..., vec(W_{L-1}), alpha`.
    pub fn group_sizes(&self) -> Vec<usize> {
        self.weights
            .iter()
            .map(|w| w.len())
            .chain(std::iter::once(self.alpha.len()))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.group_sizes().iter().sum()
    }

    pub fn to_flat(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for w in &self.weights {
            out.extend_from_slice(w.as_slice());
        }
        out.extend_from_slice(self.alpha.as_slice());
        DVector::from_vec(out)
    }

    /// Same architecture with parameters replaced from a flat vector.
    pub fn with_flat(&self, flat: &DVector<f64>) -> Result<Self> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "flat vector of length {} for {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        let weights = self
            .weights
            .iter()
            .map(|w| {
                let m = DMatrix::from_column_slice(w.nrows(), w.ncols(), &flat.as_slice()[offset..offset + w.len()]);
                offset += w.len();
                m
            })
            .collect();
        let alpha = DVector::from_column_slice(&flat.as_slice()[offset..]);
        Ok(NetworkParams {
            weights,
            alpha,
            rule: self.rule,
        })
    }

    /// Reads a chain-shaped system file. Hidden scales become `W_i`; the top
    /// scale must be a one-column layer and supplies `alpha`.
    pub fn from_system_file(file: &SystemFile) -> Result<Self> {
        let poset = file.poset()?;
        if !poset.is_chain() {
            return Err(Error::Domain("network file must describe a chain".into()));
        }
        let plan = file.build()?;
        let (top, hidden) = plan
            .nodes
            .split_last()
            .ok_or_else(|| Error::Domain("network chain needs at least two layers".into()))?;
        if hidden.is_empty() {
            return Err(Error::Domain("network chain needs at least two layers".into()));
        }
        if top.kernel.output_dim() != 1 {
            return Err(Error::Shape(format!(
                "top scale {:?} must have one column, has {}",
                top.id,
                top.kernel.output_dim()
            )));
        }
        let rule = hidden[0].rule;
        if let Some(other) = hidden.iter().find(|n| n.rule != rule) {
            return Err(Error::Domain(format!(
                "all hidden layers must share one rule; {:?} uses {}",
                other.id,
                other.rule.name()
            )));
        }
        let weights = hidden.iter().map(|n| n.kernel.weight.clone()).collect();
        let alpha = top.kernel.weight.column(0).into_owned();
        NetworkParams::new(weights, alpha, rule)
    }

    /// Chain system file `x < h1 < ... < out` describing this network.
    pub fn to_system_file(&self) -> SystemFile {
        let mut nodes = vec!["x".to_string()];
        nodes.extend((1..=self.weights.len()).map(|i| format!("h{i}")));
        nodes.push("out".to_string());
        let edges = nodes.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        let mut layers = std::collections::BTreeMap::new();
        for (i, w) in self.weights.iter().enumerate() {
            layers.insert(
                format!("h{}", i + 1),
                LayerEntry::from_kernel(&KernelSpec::new(w.clone(), Field::ZeroOne), self.rule),
            );
        }
        let alpha = DMatrix::from_column_slice(self.alpha.len(), 1, self.alpha.as_slice());
        layers.insert(
            "out".to_string(),
            LayerEntry::from_kernel(&KernelSpec::new(alpha, Field::ZeroOne), self.rule),
        );
        SystemFile {
            nodes,
            edges,
            layers,
            input_dim: Some(self.input_dim()),
        }
    }
}

/// Score and per-layer states for one input.
///
/// Layer `i` computes `h_hat_i = W_i^T a_{i-1}` and outputs the estimated
/// indicator `a_i`; for the ReLU rule `a_i = dg(1[h_hat_i > 0]) h_hat_i`, so
/// the score is `x^T W_1 dg(m_1) ... W_{L-1} dg(m_{L-1}) alpha`.
pub fn forward(params: &NetworkParams, x: &DVector<f64>) -> Result<(f64, Vec<LayerState>)> {
    if x.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input of length {} for a network expecting {}",
            x.len(),
            params.input_dim()
        )));
    }
    let mut states = Vec::with_capacity(params.weights.len());
    let mut a = x.clone();
    for w in &params.weights {
        let h_hat = w.tr_mul(&a);
        let state = crate::poset::layer_state(params.rule, a, h_hat)?;
        a = state.h_tilde.clone();
        states.push(state);
    }
    Ok((a.dot(&params.alpha), states))
}

fn check_data(params: &NetworkParams, data: &Dataset) -> Result<()> {
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

/// Mean loss over the dataset.
pub fn empirical_risk(params: &NetworkParams, l: LossL0, data: &Dataset) -> Result<f64> {
    check_data(params, data)?;
    let values: Vec<f64> = data
        .samples()
        .par_iter()
        .map(|s| forward(params, &s.x).map(|(score, _)| loss(l, score, s.y).0))
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&values) / data.len() as f64)
}

/// Back-propagated vectors `g_p = dg(h'_p) W_{p+1} ... dg(h'_{L-1}) alpha`
/// for `p = 1..L-1` (index `p-1`).
pub(crate) fn backprop_vectors(params: &NetworkParams, states: &[LayerState]) -> Vec<DVector<f64>> {
    let n = params.weights.len();
    let mut out = vec![DVector::zeros(0); n];
    let mut g = states[n - 1].h_prime.component_mul(&params.alpha);
    out[n - 1] = g.clone();
    for p in (0..n - 1).rev() {
        g = states[p].h_prime.component_mul(&(&params.weights[p + 1] * &g));
        out[p] = g.clone();
    }
    out
}

/// Gradient of one sample's loss, flattened like [`NetworkParams::to_flat`].
pub fn sample_gradient(params: &NetworkParams, l: LossL0, sample: &Sample) -> Result<DVector<f64>> {
    let (score, states) = forward(params, &sample.x)?;
    let (_, lp) = loss(l, score, sample.y);
    let mut out = DVector::zeros(params.param_count());
    if lp == 0.0 {
        return Ok(out);
    }
    let back = backprop_vectors(params, &states);
    let mut offset = 0;
    for (p, w) in params.weights.iter().enumerate() {
        let input = &states[p].t_in;
        // vec(a g^T) = g ⊗ a
        for (j, gj) in back[p].iter().enumerate() {
            for (i, ai) in input.iter().enumerate() {
                out[offset + j * w.nrows() + i] = lp * gj * ai;
            }
        }
        offset += w.len();
    }
    let top = &states.last().unwrap().h_tilde;
    for (i, v) in top.iter().enumerate() {
        out[offset + i] = lp * v;
    }
    Ok(out)
}

/// Gradient of the empirical risk.
pub fn risk_gradient(params: &NetworkParams, l: LossL0, data: &Dataset) -> Result<DVector<f64>> {
    check_data(params, data)?;
    let grads: Vec<DVector<f64>> = data
        .samples()
        .par_iter()
        .map(|s| sample_gradient(params, l, s))
        .collect::<Result<_>>()?;
    let n = params.param_count();
    let m = data.len() as f64;
    let mut column = vec![0.0; grads.len()];
    let mut out = DVector::zeros(n);
    for k in 0..n {
        for (c, g) in column.iter_mut().zip(&grads) {
            *c = g[k];
        }
        out[k] = pairwise_sum(&column) / m;
    }
    Ok(out)
}

/// Plain gradient descent; stops early once the risk is exactly zero.
/// Returns the risk after every step.
pub fn gradient_descent(
    params: &mut NetworkParams,
    l: LossL0,
    data: &Dataset,
    step: f64,
    iterations: usize,
) -> Result<Vec<f64>> {
    let mut history = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let g = risk_gradient(params, l, data)?;
        let next = params.to_flat() - g * step;
        *params = params.with_flat(&next)?;
        let risk = empirical_risk(params, l, data)?;
        history.push(risk);
        if risk == 0.0 {
            break;
        }
    }
    Ok(history)
}
