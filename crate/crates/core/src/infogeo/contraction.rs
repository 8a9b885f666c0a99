use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{bregman_divergence, BernoulliNegEntropy};
use crate::error::{Error, Result};
use crate::net::NetworkParams;
use crate::poset::{estimate_indicator, ActivationRule, SystemFile};

const PMF_TOL: f64 = 1e-12;

fn check_pmf(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain(format!("{what} is empty")));
    }
    if let Some(v) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("{what} has invalid probability {v}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PMF_TOL {
        return Err(Error::Domain(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

fn check_kernel(k: &DMatrix<f64>, from: usize, stage: usize) -> Result<()> {
    if k.nrows() != from {
        return Err(Error::Shape(format!(
            "kernel {stage} has {} rows but acts on {from} states",
            k.nrows()
        )));
    }
    for (i, row) in k.row_iter().enumerate() {
        let r: Vec<f64> = row.iter().copied().collect();
        check_pmf(&r, &format!("kernel {stage} row {i}"))?;
    }
    Ok(())
}

/// `KL(p ‖ q)` in nats; `+∞` when `p` puts mass where `q` has none.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            if *a == 0.0 {
                0.0
            } else if *b == 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).ln()
            }
        })
        .sum()
}

/// KL divergence after each stage of a chain of row-stochastic kernels:
/// `D_0 = KL(p‖q)`, `D_l = KL(pK_1…K_l ‖ qK_1…K_l)`.
pub fn contraction_check(p: &[f64], q: &[f64], kernels: &[DMatrix<f64>]) -> Result<Vec<f64>> {
    check_pmf(p, "p")?;
    check_pmf(q, "q")?;
    if p.len() != q.len() {
        return Err(Error::Shape(format!("p has {} states, q has {}", p.len(), q.len())));
    }
    let mut pv = DVector::from_column_slice(p);
    let mut qv = DVector::from_column_slice(q);
    let mut out = vec![kl_divergence(p, q)];
    for (stage, k) in kernels.iter().enumerate() {
        check_kernel(k, pv.len(), stage + 1)?;
        pv = k.tr_mul(&pv);
        qv = k.tr_mul(&qv);
        out.push(kl_divergence(pv.as_slice(), qv.as_slice()));
    }
    Ok(out)
}

/// Per-layer divergence between a signal and its circular shift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeformationReport {
    /// `D_{ψ*}[η′_l : η_l]` for layers `l = 1..L-1`, summed over units.
    pub divergences: Vec<f64>,
    /// Whether the sequence is non-increasing; reported, not required.
    pub monotone: bool,
}

/// Pushes `base` and its circular shift by `shift` through the hidden layers
/// of `net` using sigmoid (Bernoulli expectation) coordinates and compares
/// them layer by layer with the Bernoulli dual Bregman divergence.
pub fn deformation_scenario(base: &[f64], shift: usize, net: &NetworkParams) -> Result<DeformationReport> {
    if base.len() != net.input_dim() {
        return Err(Error::Shape(format!(
            "signal of length {} for a network with input {}",
            base.len(),
            net.input_dim()
        )));
    }
    if shift >= base.len() {
        return Err(Error::Domain(format!(
            "shift {shift} must be smaller than the signal length {}",
            base.len()
        )));
    }
    crate::error::ensure_finite(base, "signal")?;
    let n = base.len();
    let shifted: Vec<f64> = (0..n).map(|i| base[(i + n - shift) % n]).collect();
    let mut a = DVector::from_column_slice(base);
    let mut b = DVector::from_column_slice(&shifted);
    let mut divergences = Vec::with_capacity(net.weights.len());
    for w in &net.weights {
        let (ea, _) = estimate_indicator(ActivationRule::PartialExpectation01, &w.tr_mul(&a))?;
        let (eb, _) = estimate_indicator(ActivationRule::PartialExpectation01, &w.tr_mul(&b))?;
        let potential = BernoulliNegEntropy { dim: ea.len() };
        divergences.push(bregman_divergence(&potential, &ea, &eb)?);
        a = ea;
        b = eb;
    }
    let monotone = divergences.windows(2).all(|w| w[1] <= w[0]);
    Ok(DeformationReport { divergences, monotone })
}

/// JSON input of the `contract` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ContractionModel {
    /// Kernels are row-major nested arrays, one row per source state.
    Kernels {
        p: Vec<f64>,
        q: Vec<f64>,
        kernels: Vec<Vec<Vec<f64>>>,
    },
    Deformation {
        base: Vec<f64>,
        shift: usize,
        net: SystemFile,
    },
}

impl ContractionModel {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("contraction model: {e}")))
    }

    /// Divergence per stage and whether it never increased by more than 1e-12.
    pub fn run(&self) -> Result<(Vec<f64>, bool)> {
        match self {
            ContractionModel::Kernels { p, q, kernels } => {
                let mats = kernels
                    .iter()
                    .enumerate()
                    .map(|(i, rows)| nested_to_matrix(rows, i + 1))
                    .collect::<Result<Vec<_>>>()?;
                let d = contraction_check(p, q, &mats)?;
                let ok = d.windows(2).all(|w| !(w[1] > w[0] + 1e-12));
                Ok((d, ok))
            }
            ContractionModel::Deformation { base, shift, net } => {
                let params = NetworkParams::from_system_file(net)?;
                let r = deformation_scenario(base, *shift, &params)?;
                Ok((r.divergences, r.monotone))
            }
        }
    }
}

fn nested_to_matrix(rows: &[Vec<f64>], stage: usize) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if r == 0 || c == 0 || rows.iter().any(|x| x.len() != c) {
        return Err(Error::Shape(format!(
            "kernel {stage} is not a non-empty rectangular matrix"
        )));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_collapsing_kernels() {
        let p = [0.2, 0.5, 0.3];
        let q = [0.4, 0.4, 0.2];
        let d0 = kl_divergence(&p, &q);
        let d = contraction_check(&p, &q, &[DMatrix::identity(3, 3), DMatrix::identity(3, 3)]).unwrap();
        assert_eq!(d, vec![d0, d0, d0]);
        let collapse = DMatrix::from_row_slice(3, 2, &[0.3, 0.7, 0.3, 0.7, 0.3, 0.7]);
        let d = contraction_check(&p, &q, &[collapse]).unwrap();
        assert!(d[1].abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            contraction_check(&[0.5, 0.6], &[0.5, 0.5], &[]),
            Err(Error::Domain(_))
        ));
        let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.4, 0.0, 1.0]);
        assert!(matches!(
            contraction_check(&[0.5, 0.5], &[0.5, 0.5], &[bad]),
            Err(Error::Domain(_))
        ));
        assert!(kl_divergence(&[1.0, 0.0], &[0.0, 1.0]).is_infinite());
    }

    #[test]
    fn zero_shift_and_dead_layer() {
        let net = NetworkParams::new(
            vec![
                DMatrix::from_fn(4, 3, |i, j| (i as f64 - j as f64) * 0.4),
                DMatrix::zeros(3, 2),
                DMatrix::from_element(2, 2, 0.5),
            ],
            DVector::from_element(2, 1.0),
            ActivationRule::PartialExpectation01,
        )
        .unwrap();
        let base = [0.1, 0.9, -0.4, 2.0];
        let r = deformation_scenario(&base, 0, &net).unwrap();
        assert!(r.divergences.iter().all(|d| *d == 0.0));
        let r = deformation_scenario(&base, 1, &net).unwrap();
        assert!(r.divergences[0] > 0.0);
        assert_eq!(&r.divergences[1..], &[0.0, 0.0]);
        assert!(r.monotone);
        assert!(matches!(deformation_scenario(&base, 4, &net), Err(Error::Domain(_))));
    }

    #[test]
    fn model_json() {
        let m = ContractionModel::from_json(
            r#"{"kind":"kernels","p":[0.5,0.5],"q":[0.9,0.1],"kernels":[[[0.8,0.2],[0.3,0.7]]]}"#,
        )
        .unwrap();
        let (d, ok) = m.run().unwrap();
        assert_eq!(d.len(), 2);
        assert!(ok && d[1] < d[0]);
    }
}
