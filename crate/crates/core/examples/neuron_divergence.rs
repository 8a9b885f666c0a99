//! Neuron coordinates of a Bernoulli unit and the dual Bregman divergence
//! between two of them, computed both in closed form and by a numeric dual.

use nalgebra::DVector;
use spectral_landscape::infogeo::{
    bregman_divergence, neuron_coordinates, BernoulliNegEntropy, DualPotential, ExpFamilyModel, LogPartition,
};

fn main() -> spectral_landscape::Result<()> {
    let model = ExpFamilyModel::bernoulli();
    let none = DVector::zeros(0);
    let a = neuron_coordinates(&model, &DVector::from_element(1, -0.4), &none)?;
    let b = neuron_coordinates(&model, &DVector::from_element(1, 1.3), &none)?;
    println!("eta(-0.4) = {:.6}, eta(1.3) = {:.6}", a.eta[0], b.eta[0]);
    let (ea, eb) = (DVector::from_vec(a.eta), DVector::from_vec(b.eta));
    let closed = bregman_divergence(&BernoulliNegEntropy { dim: 1 }, &ea, &eb)?;
    let numeric = bregman_divergence(&DualPotential::new(LogPartition { model: &model }), &ea, &eb)?;
    println!("D[eta' : eta] closed form {closed:.12}, numeric dual {numeric:.12}");
    Ok(())
}
