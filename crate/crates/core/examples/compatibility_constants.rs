//! Compatibility constant, restricted eigenvalue and adaptive restricted
//! eigenvalue of a sampled Gram matrix, cross-checked by the brute-force oracle.
//!
//! cargo run --release --example compatibility_constants

use isoquad::constants::{constant, oracle_minimum, ConeSpec, NormMode, OracleTarget};
use isoquad::ensembles::{sample, EnsembleSpec};
use isoquad::matcore::SymMatrix;

fn main() -> isoquad::Result<()> {
    let p = 6;
    let spec = EnsembleSpec::gaussian(p).with_sigma0(SymMatrix::equicorrelated(p, 0.4));
    let x = sample(&spec, 20, 2024)?;

    for (label, mode) in [("phi^2", NormMode::L1OnS), ("kappa^2", NormMode::L2OnUS), ("kappa_*^2", NormMode::Adaptive)] {
        let cone = ConeSpec::new(vec![0, 3], 1.0, mode);
        let r = constant(&x.gram, &cone)?;
        let o = oracle_minimum(&x.gram, OracleTarget::Cone(&cone), 2000)?;
        println!("{label:>10}  solver {:.8}  oracle {:.8}  ({:?})", r.value, o.value, r.certificate);
    }

    // closed form on the 2x2 correlated family: 1 - rho^2
    let rho = 0.6;
    let a = SymMatrix::equicorrelated(2, rho);
    let phi = constant(&a, &ConeSpec::compat(vec![0], 1.0))?.value;
    println!("rho = {rho}: phi^2 = {phi:.12}, 1 - rho^2 = {:.12}", 1.0 - rho * rho);
    Ok(())
}
