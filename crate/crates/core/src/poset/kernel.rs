use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Value set of a group indicator coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Field {
    /// `{0, 1}`
    #[serde(rename = "01")]
    ZeroOne,
    /// `{-1, 1}`
    #[serde(rename = "pm1")]
    PlusMinusOne,
}

impl Field {
    /// Indicator values in ascending order.
    pub fn values(self) -> [f64; 2] {
        match self {
            Field::ZeroOne => [0.0, 1.0],
            Field::PlusMinusOne => [-1.0, 1.0],
        }
    }
}

/// How a layer turns its preactivation into an estimated group indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivationRule {
    /// Most likely indicator in `{0,1}` applied as a mask (ReLU).
    #[serde(rename = "relu")]
    ArgmaxMask01,
    /// Expected indicator in `{0,1}` applied as a mask (Swish).
    #[serde(rename = "swish")]
    ExpectationMask01,
    /// Expected indicator in `{0,1}` (sigmoid).
    #[serde(rename = "sigmoid")]
    PartialExpectation01,
    /// Expected indicator in `{-1,1}` (tanh).
    #[serde(rename = "tanh")]
    PartialExpectationPm1,
}

impl ActivationRule {
    pub fn name(self) -> &'static str {
        match self {
            ActivationRule::ArgmaxMask01 => "relu",
            ActivationRule::ExpectationMask01 => "swish",
            ActivationRule::PartialExpectation01 => "sigmoid",
            ActivationRule::PartialExpectationPm1 => "tanh",
        }
    }

    /// Piecewise-linear rules have zero second derivative away from kinks.
    pub fn is_piecewise_linear(self) -> bool {
        matches!(self, ActivationRule::ArgmaxMask01)
    }

    /// Scalar estimate and its derivative at `u`.
    pub fn apply(self, u: f64) -> (f64, f64) {
        match self {
            ActivationRule::ArgmaxMask01 => {
                if u > 0.0 {
                    (u, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            ActivationRule::ExpectationMask01 => {
                let s = logistic(u);
                (s * u, s + u * s * (1.0 - s))
            }
            ActivationRule::PartialExpectation01 => {
                let s = logistic(u);
                (s, s * (1.0 - s))
            }
            ActivationRule::PartialExpectationPm1 => {
                let t = u.tanh();
                (t, 1.0 - t * t)
            }
        }
    }
}

pub(crate) fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Parametric kernel of one layer: `nu(h|t) ∝ exp(h^T W^T t)` over `field^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    /// rows = input dimension, cols = number of group indicators.
    pub weight: DMatrix<f64>,
    pub field: Field,
}

impl KernelSpec {
    pub fn new(weight: DMatrix<f64>, field: Field) -> Self {
        KernelSpec { weight, field }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }

    /// Preactivation `W^T t`.
    pub fn preactivation(&self, t_tilde: &DVector<f64>) -> Result<DVector<f64>> {
        if t_tilde.len() != self.weight.nrows() {
            return Err(Error::Shape(format!(
                "input of length {} for kernel with {} rows",
                t_tilde.len(),
                self.weight.nrows()
            )));
        }
        Ok(self.weight.tr_mul(t_tilde))
    }
}

/// Everything computed at one layer for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    /// Input to the layer (concatenated predecessor outputs).
    pub t_in: DVector<f64>,
    /// Preactivation `W^T t`.
    pub h_hat: DVector<f64>,
    /// Estimated indicator applied to the preactivation (layer output).
    pub h_tilde: DVector<f64>,
    /// Derivative of the estimation map at `h_hat`.
    pub h_prime: DVector<f64>,
    /// `h_prime ⊙ h_prime`, the factor carried by second-order blocks.
    pub h_second: DVector<f64>,
}

/// Per-coordinate pmf of the group indicator given the layer input.
///
/// Entry `[i][k]` is the probability that coordinate `i` takes
/// `spec.field.values()[k]`. Coordinates are conditionally independent, so
/// the joint law over `field^n` is the product of these rows.
pub fn conditional_group_law(spec: &KernelSpec, t_tilde: &DVector<f64>) -> Result<Vec<[f64; 2]>> {
    ensure_finite(t_tilde.as_slice(), "kernel input")?;
    ensure_finite(spec.weight.as_slice(), "kernel weight")?;
    let logits = spec.preactivation(t_tilde)?;
    let [lo, hi] = spec.field.values();
    Ok(logits
        .iter()
        .map(|&u| {
            // p(hi) = exp(hi u) / (exp(lo u) + exp(hi u)) = logistic((hi - lo) u)
            let p_hi = logistic((hi - lo) * u);
            [1.0 - p_hi, p_hi]
        })
        .collect())
}

/// Estimated indicator and its derivative for a preactivation vector.
///
/// For [`ActivationRule::ArgmaxMask01`] ties at zero resolve to the inactive
/// state, so the output is exactly `max(0, h_hat)` with a `1[h_hat > 0]` mask.
pub fn estimate_indicator(rule: ActivationRule, h_hat: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    ensure_finite(h_hat.as_slice(), "preactivation")?;
    let mut out = DVector::zeros(h_hat.len());
    let mut deriv = DVector::zeros(h_hat.len());
    for (i, &u) in h_hat.iter().enumerate() {
        let (v, d) = rule.apply(u);
        out[i] = v;
        deriv[i] = d;
    }
    Ok((out, deriv))
}

pub(crate) fn layer_state(rule: ActivationRule, t_in: DVector<f64>, h_hat: DVector<f64>) -> Result<LayerState> {
    let (h_tilde, h_prime) = estimate_indicator(rule, &h_hat)?;
    let h_second = h_prime.component_mul(&h_prime);
    Ok(LayerState {
        t_in,
        h_hat,
        h_tilde,
        h_prime,
        h_second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RULES: [ActivationRule; 4] = [
        ActivationRule::ArgmaxMask01,
        ActivationRule::ExpectationMask01,
        ActivationRule::PartialExpectation01,
        ActivationRule::PartialExpectationPm1,
    ];

    #[test]
    fn zero_weight_is_uniform() {
        for field in [Field::ZeroOne, Field::PlusMinusOne] {
            let spec = KernelSpec::new(DMatrix::zeros(3, 2), field);
            let law = conditional_group_law(&spec, &DVector::from_vec(vec![1.0, -2.0, 0.5])).unwrap();
            for row in law {
                assert_eq!(row, [0.5, 0.5]);
            }
        }
    }

    #[test]
    fn logit_ln3_gives_three_to_one() {
        let spec = KernelSpec::new(DMatrix::from_element(1, 1, 3f64.ln()), Field::ZeroOne);
        let law = conditional_group_law(&spec, &DVector::from_element(1, 1.0)).unwrap();
        assert!((law[0][0] - 0.25).abs() < 1e-15);
        assert!((law[0][1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn pm1_law_matches_direct_softmax() {
        let u: f64 = 0.7;
        let spec = KernelSpec::new(DMatrix::from_element(1, 1, u), Field::PlusMinusOne);
        let law = conditional_group_law(&spec, &DVector::from_element(1, 1.0)).unwrap();
        let z = (-u).exp() + u.exp();
        assert!((law[0][0] - (-u).exp() / z).abs() < 1e-15);
        assert!((law[0][1] - u.exp() / z).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = KernelSpec::new(DMatrix::zeros(2, 1), Field::ZeroOne);
        assert!(matches!(
            conditional_group_law(&spec, &DVector::from_element(3, 0.0)),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            conditional_group_law(&spec, &DVector::from_vec(vec![f64::NAN, 0.0])),
            Err(Error::Numeric(_))
        ));
        assert!(estimate_indicator(ActivationRule::ArgmaxMask01, &DVector::from_element(1, f64::INFINITY)).is_err());
    }

    #[test]
    fn relu_sign_cases() {
        let (h, d) = estimate_indicator(ActivationRule::ArgmaxMask01, &DVector::from_vec(vec![2.0, -3.0])).unwrap();
        assert_eq!(h.as_slice(), &[2.0, 0.0]);
        assert_eq!(d.as_slice(), &[1.0, 0.0]);
        let (h, d) = estimate_indicator(ActivationRule::ArgmaxMask01, &DVector::zeros(1)).unwrap();
        assert_eq!((h[0], d[0]), (0.0, 0.0));
    }

    #[test]
    fn smooth_rules_at_origin() {
        let zero = DVector::zeros(1);
        let (h, _) = estimate_indicator(ActivationRule::PartialExpectation01, &zero).unwrap();
        assert_eq!(h[0], 0.5);
        let (h, d) = estimate_indicator(ActivationRule::ExpectationMask01, &zero).unwrap();
        assert_eq!(h[0], 0.0);
        assert_eq!(d[0], 0.5);
        let (h, d) = estimate_indicator(ActivationRule::PartialExpectationPm1, &zero).unwrap();
        assert_eq!((h[0], d[0]), (0.0, 1.0));
    }

    proptest! {
        #[test]
        fn law_rows_normalise(w in prop::collection::vec(-20.0f64..20.0, 6), t in prop::collection::vec(-5.0f64..5.0, 3)) {
            for field in [Field::ZeroOne, Field::PlusMinusOne] {
                let spec = KernelSpec::new(DMatrix::from_row_slice(3, 2, &w), field);
                let law = conditional_group_law(&spec, &DVector::from_vec(t.clone())).unwrap();
                for row in law {
                    prop_assert!(row[0] >= 0.0 && row[1] >= 0.0);
                    prop_assert!((row[0] + row[1] - 1.0).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn relu_is_argmax_of_law_times_preactivation(w in prop::collection::vec(-3.0f64..3.0, 4), t in prop::collection::vec(-3.0f64..3.0, 2)) {
            let spec = KernelSpec::new(DMatrix::from_row_slice(2, 2, &w), Field::ZeroOne);
            let t = DVector::from_vec(t);
            let law = conditional_group_law(&spec, &t).unwrap();
            let h_hat = spec.preactivation(&t).unwrap();
            let (h_tilde, _) = estimate_indicator(ActivationRule::ArgmaxMask01, &h_hat).unwrap();
            for i in 0..2 {
                // ties resolve to the inactive value
                let argmax = if law[i][1] > law[i][0] { 1.0 } else { 0.0 };
                prop_assert_eq!(h_tilde[i], argmax * h_hat[i]);
                prop_assert_eq!(h_tilde[i], h_hat[i].max(0.0));
            }
        }

        #[test]
        fn derivatives_match_central_differences(u in -6.0f64..6.0) {
            prop_assume!(u.abs() > 1e-3);
            let step = 1e-6;
            for rule in RULES {
                let (_, d) = rule.apply(u);
                let fd = (rule.apply(u + step).0 - rule.apply(u - step).0) / (2.0 * step);
                prop_assert!((d - fd).abs() <= 1e-6, "{:?} at {}: {} vs {}", rule, u, d, fd);
            }
        }

        #[test]
        fn partial_expectations_stay_open(u in -15.0f64..15.0) {
            let s = ActivationRule::PartialExpectation01.apply(u).0;
            prop_assert!(s > 0.0 && s < 1.0);
            let t = ActivationRule::PartialExpectationPm1.apply(u).0;
            prop_assert!(t > -1.0 && t < 1.0);
        }
    }
}
