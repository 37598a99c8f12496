//! An indefinite matrix whose 2x2 principal submatrices are all PSD still
//! obeys the l1-penalized floor on every direction.
//!
//! cargo run --release --example transfer_principle

use isoquad::bounds::{transfer_conclusion_holds, transfer_floor_coefficient, transfer_hypothesis};
use isoquad::matcore::{extreme_eigenvalues, norm1, quadratic_form, SymMatrix};
use rand::{Rng, SeedableRng};

fn main() -> isoquad::Result<()> {
    let p = 8;
    // equicorrelation with negative rho is indefinite yet 2x2 PSD for |rho| <= 1
    let a = SymMatrix::equicorrelated(p, -0.9);
    let d = 2;
    let h = transfer_hypothesis(&a, d, 0)?;
    println!("lambda_min = {:.3}, hypothesis holds: {} ({} submatrices)", extreme_eigenvalues(&a).min, h.holds, h.submatrices_checked);
    let coef = transfer_floor_coefficient(&a, d)?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::INFINITY;
    let mut all = true;
    for _ in 0..10_000 {
        let u: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        all &= transfer_conclusion_holds(&a, d, &u)?;
        worst = worst.min(quadratic_form(&a, &u)? / norm1(&u).powi(2));
    }
    println!("floor coefficient {coef:.4}, smallest u^T A u / ||u||_1^2 seen {worst:.4}, all above: {all}");
    Ok(())
}
