mod common;

use common::rng;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use spectral_landscape::infogeo::{
    bregman_divergence, decompose_likelihood, neuron_coordinates, Composition, ConvexPotential, DualPotential,
    ExpFamilyModel, LayeredModel, LogPartition,
};

/// Four support points in the plane with random base weights: a minimal
/// two-parameter family.
fn random_family(seed: u64) -> ExpFamilyModel {
    let mut r = rng(seed);
    let stats = vec![
        DVector::from_column_slice(&[0.0, 0.0]),
        DVector::from_column_slice(&[1.0, r.random_range(-0.5..0.5)]),
        DVector::from_column_slice(&[r.random_range(-0.5..0.5), 1.0]),
        DVector::from_column_slice(&[1.0 + r.random_range(0.0..0.5), 1.0 + r.random_range(0.0..0.5)]),
    ];
    let base = (0..4).map(|_| r.random_range(0.2..2.0)).collect();
    ExpFamilyModel::new(stats, base, Composition::Identity).unwrap()
}

// Brute-force log-sum-exp, independent of the library's stabilized version.
fn naive_log_partition(model: &ExpFamilyModel, base: &[f64], f: &DVector<f64>) -> f64 {
    model
        .support()
        .iter()
        .zip(base)
        .map(|(g, b)| b * f.dot(g).exp())
        .sum::<f64>()
        .ln()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn legendre_dual_is_an_involution(seed in 0u64..1000, t0 in -1.5f64..1.5, t1 in -1.5f64..1.5) {
        let model = random_family(seed);
        let psi = LogPartition { model: &model };
        let theta = DVector::from_column_slice(&[t0, t1]);
        let double = DualPotential::new(DualPotential::new(LogPartition { model: &model }));
        let v = double.value(&theta).unwrap();
        prop_assert!((v - psi.value(&theta).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn divergence_duality(seed in 0u64..1000, a in -1.5f64..1.5, b in -1.5f64..1.5, c in -1.5f64..1.5, d in -1.5f64..1.5) {
        let model = random_family(seed);
        let psi = LogPartition { model: &model };
        let theta = DVector::from_column_slice(&[a, b]);
        let theta_p = DVector::from_column_slice(&[c, d]);
        let eta = psi.gradient(&theta).unwrap();
        let eta_p = psi.gradient(&theta_p).unwrap();
        let dual = DualPotential::new(LogPartition { model: &model });
        // D_ψ*[η′ : η] against D_ψ[θ : θ′]
        let lhs = bregman_divergence(&dual, &eta, &eta_p).unwrap();
        let rhs = bregman_divergence(&psi, &theta_p, &theta).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
        prop_assert!(lhs >= 0.0);
    }

    #[test]
    fn log_partition_is_midpoint_convex(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0) {
        let model = random_family(seed);
        let psi = LogPartition { model: &model };
        let x = DVector::from_column_slice(&[a, b]);
        let y = DVector::from_column_slice(&[c, d]);
        let mid = psi.value(&((&x + &y) * 0.5)).unwrap();
        prop_assert!(mid <= 0.5 * (psi.value(&x).unwrap() + psi.value(&y).unwrap()) + 1e-12);
    }

    #[test]
    fn mean_coordinates_lie_in_the_hull(seed in 0u64..1000, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let model = random_family(seed);
        let theta = DVector::from_column_slice(&[a, b]);
        let c = neuron_coordinates(&model, &theta, &DVector::zeros(0)).unwrap();
        let eta = DVector::from_column_slice(&c.eta);
        // η = Σ p_k g_k with p the family pmf, and that pmf is a probability vector.
        let p = model.pmf(&theta).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| *v > 0.0));
        let recon = model.support().iter().zip(&p).fold(DVector::zeros(2), |acc, (g, w)| acc + g * *w);
        prop_assert!((recon - eta).amax() < 1e-12);
    }
}

#[test]
fn log_partition_matches_naive_sum() {
    let mut r = rng(17);
    let base: Vec<f64> = (0..5).map(|_| r.random_range(0.5..1.5)).collect();
    let stats: Vec<DVector<f64>> = (0..5)
        .map(|k| DVector::from_column_slice(&[k as f64, (k * k) as f64 / 4.0]))
        .collect();
    let model = ExpFamilyModel::new(stats, base.clone(), Composition::Identity).unwrap();
    for _ in 0..20 {
        let f = DVector::from_fn(2, |_, _| r.random_range(-1.0..1.0));
        let got = model.log_partition(&f).unwrap();
        assert!((got - naive_log_partition(&model, &base, &f)).abs() < 1e-13);
    }
}

#[test]
fn two_scale_decomposition_matches_brute_force() {
    // x, h1, h2 all binary; ln p(x) computed by summing the joint by hand.
    let prior = [0.35, 0.65];
    let k2 = DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.25, 0.75]); // p(h1|h2)
    let k1 = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.4, 0.6]); // p(x|h1)
    let model = LayeredModel::new(prior.to_vec(), vec![k1.clone(), k2.clone()]).unwrap();
    let mut px = [0.0; 2];
    for h2 in 0..2 {
        for h1 in 0..2 {
            for (x, p) in px.iter_mut().enumerate() {
                *p += prior[h2] * k2[(h2, h1)] * k1[(h1, x)];
            }
        }
    }
    let data = [0.3, 0.7];
    let nu = vec![
        DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.2, 0.8]),
        DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.1, 0.9]),
    ];
    let r = decompose_likelihood(&model, &data, &nu).unwrap();
    let ll = 0.3 * px[0].ln() + 0.7 * px[1].ln();
    assert!((r.complete_ll - ll).abs() < 1e-14);
    assert!(r.identity_defect < 1e-12);
    assert!(r.kl_terms.iter().all(|k| *k > 0.0));
}
