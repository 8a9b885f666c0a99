//! Samples GOE matrices and measures the Kolmogorov distance between their
//! eigenvalues and the deterministic-equivalent CDF.

use nalgebra::DMatrix;
use spectral_landscape::numeric::{linspace, symmetric_eigenvalues};
use spectral_landscape::rmt::ensembles::goe;
use spectral_landscape::rmt::{ks_distance, solve_mde, stieltjes_invert, MDEProblem, SelfEnergy};
use spectral_landscape::rng::trial_rng;

fn main() -> spectral_landscape::Result<()> {
    let grid = linspace(-2.5, 2.5, 1001);
    let eta = 1e-3;
    let problem = MDEProblem::new(DMatrix::zeros(1, 1), SelfEnergy::Isotropic { c: 1.0 })?.with_energies(&grid, eta);
    let density = stieltjes_invert(&solve_mde(&problem)?, &grid, eta)?;
    let cdf = density.cdf();
    for trial in 0..4 {
        let eigs = symmetric_eigenvalues(&goe(400, 1.0, &mut trial_rng(7, trial)))?;
        println!("trial {trial}: KS = {:.4}", ks_distance(&eigs, &cdf));
    }
    Ok(())
}
