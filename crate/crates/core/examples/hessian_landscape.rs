//! Exact Hessian of a small ReLU network's hinge risk, its spectrum, and the
//! operator-norm bound; then the same report after training to zero risk.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use spectral_landscape::hessian::landscape_report;
use spectral_landscape::net::{forward, gradient_descent, Dataset, LossL0, NetworkParams, Sample};
use spectral_landscape::poset::ActivationRule;
use spectral_landscape::rng::trial_rng;

fn main() -> spectral_landscape::Result<()> {
    let mut rng = trial_rng(11, 0);
    let teacher = NetworkParams::random(&[3, 6, 4], ActivationRule::ArgmaxMask01, 1.0, &mut rng)?;
    let samples = (0..12)
        .map(|_| {
            let x = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = forward(&teacher, &x)?.0.signum();
            Sample::new(x, y)
        })
        .collect::<spectral_landscape::Result<Vec<_>>>()?;
    let data = Dataset::new(samples)?;
    let mut params = NetworkParams::random(&[3, 6, 4], ActivationRule::ArgmaxMask01, 1.0, &mut rng)?;

    let show = |p: &NetworkParams| -> spectral_landscape::Result<()> {
        let r = landscape_report(p, LossL0::Hinge, &data)?;
        println!(
            "risk {:.4}  ‖H‖ {:.4}  bound {:.4}  negative fraction {:.3}",
            r.risk, r.op_norm, r.bound, r.neg_fraction
        );
        Ok(())
    };
    show(&params)?;
    let history = gradient_descent(&mut params, LossL0::Hinge, &data, 0.2, 5000)?;
    println!("after {} steps:", history.len());
    show(&params)
}
