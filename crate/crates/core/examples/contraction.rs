//! Divergence between two distributions pushed through a chain of stochastic
//! maps never grows.

use nalgebra::DMatrix;
use spectral_landscape::infogeo::contraction_check;

fn main() -> spectral_landscape::Result<()> {
    let p = [0.6, 0.3, 0.1];
    let q = [0.2, 0.3, 0.5];
    let blur = DMatrix::from_row_slice(3, 3, &[0.8, 0.1, 0.1, 0.1, 0.8, 0.1, 0.1, 0.1, 0.8]);
    let merge = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 0.5, 0.0, 1.0]);
    let d = contraction_check(&p, &q, &[blur.clone(), blur, merge])?;
    for (stage, v) in d.iter().enumerate() {
        println!("stage {stage}: KL = {v:.6}");
    }
    Ok(())
}
