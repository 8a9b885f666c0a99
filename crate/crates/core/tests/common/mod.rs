//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spectral_landscape::net::{empirical_risk, forward, kink_distance, Dataset, LossL0, NetworkParams, Sample};
use spectral_landscape::poset::ActivationRule;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hessian of the empirical risk by second-order central differences.
pub fn fd_hessian(params: &NetworkParams, l: LossL0, data: &Dataset, h: f64) -> DMatrix<f64> {
    let theta = params.to_flat();
    let n = theta.len();
    let f = |d: &DVector<f64>| empirical_risk(&params.with_flat(&(&theta + d)).unwrap(), l, data).unwrap();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut pp = DVector::zeros(n);
            let mut pm = DVector::zeros(n);
            let mut mp = DVector::zeros(n);
            let mut mm = DVector::zeros(n);
            pp[i] += h;
            pp[j] += h;
            pm[i] += h;
            pm[j] -= h;
            mp[i] -= h;
            mp[j] += h;
            mm[i] -= h;
            mm[j] -= h;
            let v = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Smallest distance of any preactivation or loss kink from its breakpoint.
pub fn kink_margin(params: &NetworkParams, l: LossL0, data: &Dataset) -> f64 {
    let mut margin = f64::INFINITY;
    for s in data.samples() {
        let (score, states) = forward(params, &s.x).unwrap();
        margin = margin.min(kink_distance(l, score, s.y));
        for st in &states {
            for v in st.h_hat.iter() {
                margin = margin.min(v.abs());
            }
        }
    }
    margin
}

/// Random ReLU network (L <= 4, widths <= 8) and a small dataset whose
/// preactivations and loss values stay at least `margin` from every kink.
pub fn random_kink_free(rng: &mut ChaCha8Rng, l: LossL0, margin: f64) -> (NetworkParams, Dataset) {
    loop {
        let depth = rng.random_range(2..=4);
        let widths: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=8)).collect();
        let params = NetworkParams::random(&widths, ActivationRule::ArgmaxMask01, 1.0, rng).unwrap();
        let m = rng.random_range(1..=4);
        let samples = (0..m)
            .map(|_| {
                let x = DVector::from_fn(widths[0], |_, _| rng.random_range(-1.0..1.0));
                let y = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                Sample::new(x, y).unwrap()
            })
            .collect();
        let data = Dataset::new(samples).unwrap();
        let active = data
            .samples()
            .iter()
            .any(|s| spectral_landscape::net::loss(l, forward(&params, &s.x).unwrap().0, s.y).1 != 0.0);
        if active && kink_margin(&params, l, &data) > margin {
            return (params, data);
        }
    }
}

/// Max entry error relative to the largest entry of the reference.
pub fn rel_max_error(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    (a - reference).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
}
