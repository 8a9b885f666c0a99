//! Solves the matrix Dyson equation for a pure-noise problem and compares the
//! recovered density with the semicircle.

use nalgebra::DMatrix;
use spectral_landscape::numeric::linspace;
use spectral_landscape::rmt::ensembles::semicircle_density;
use spectral_landscape::rmt::{solve_mde, stieltjes_invert, MDEProblem, SelfEnergy};

fn main() -> spectral_landscape::Result<()> {
    let grid = linspace(-3.0, 3.0, 13);
    let eta = 1e-4;
    let problem = MDEProblem::new(DMatrix::zeros(1, 1), SelfEnergy::Isotropic { c: 1.0 })?.with_energies(&grid, eta);
    let solution = solve_mde(&problem)?;
    let density = stieltjes_invert(&solution, &grid, eta)?;
    println!("{:>6} {:>12} {:>12}", "E", "rho", "semicircle");
    for (e, r) in density.grid.iter().zip(&density.density) {
        println!("{e:>6.2} {r:>12.6} {:>12.6}", semicircle_density(*e, 1.0));
    }
    let worst = solution.points.iter().map(|p| p.residual).fold(0.0, f64::max);
    println!("max residual {worst:.2e}");
    Ok(())
}
