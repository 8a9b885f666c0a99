//! Checks that sampled eigenvalues stay within Spec A widened by 2‖S‖^{1/2}.

use nalgebra::DMatrix;
use spectral_landscape::numeric::symmetric_eigenvalues;
use spectral_landscape::rmt::ensembles::rotated_semicircle;
use spectral_landscape::rmt::{support_bound_check, SelfEnergy, SupportPoints};
use spectral_landscape::rng::trial_rng;

fn main() -> spectral_landscape::Result<()> {
    let n = 200;
    let sigma = 0.5;
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            if i % 2 == 0 {
                3.0
            } else {
                -3.0
            }
        } else {
            0.0
        }
    });
    let s = SelfEnergy::Isotropic { c: sigma * sigma };
    let h = &a + rotated_semicircle(n, sigma, &mut trial_rng(1, 0));
    let eigs = symmetric_eigenvalues(&h)?;
    let check = support_bound_check(SupportPoints::Eigenvalues(&eigs), &a, &s)?;
    println!(
        "‖S‖ = {}, radius {}, intervals {:?}",
        check.s_norm, check.radius, check.intervals
    );
    println!("max excess {:.3e}, holds: {}", check.max_excess, check.holds);
    Ok(())
}
