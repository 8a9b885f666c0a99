//! Builds a layered system over a diamond-shaped scale poset and evaluates it.

use nalgebra::{DMatrix, DVector};
use spectral_landscape::poset::{build_s_system, ActivationRule, Field, KernelSpec, ScalePoset};
use std::collections::BTreeMap;

fn main() -> spectral_landscape::Result<()> {
    let poset = ScalePoset::new(
        &["x", "left", "right", "top"],
        &[("x", "left"), ("x", "right"), ("left", "top"), ("right", "top")],
    )?;
    let mut layers = BTreeMap::new();
    layers.insert(
        "left".to_string(),
        (
            KernelSpec::new(
                DMatrix::from_fn(2, 3, |i, j| (i + j) as f64 * 0.5 - 0.2),
                Field::ZeroOne,
            ),
            ActivationRule::ArgmaxMask01,
        ),
    );
    layers.insert(
        "right".to_string(),
        (
            KernelSpec::new(
                DMatrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { -0.3 }),
                Field::PlusMinusOne,
            ),
            ActivationRule::PartialExpectationPm1,
        ),
    );
    // `top` reads left ++ right (5 values).
    layers.insert(
        "top".to_string(),
        (
            KernelSpec::new(DMatrix::from_element(5, 1, 0.4), Field::ZeroOne),
            ActivationRule::PartialExpectation01,
        ),
    );
    let plan = build_s_system(&poset, 2, &layers)?;
    println!("build order: {:?}", plan.order());
    let out = plan.evaluate(&DVector::from_column_slice(&[1.2, -0.4]))?;
    for (id, state) in &out.states {
        println!("{id:>6}: {:?}", state.h_tilde.as_slice());
    }
    println!("output: {:?}", out.output.as_slice());
    Ok(())
}
