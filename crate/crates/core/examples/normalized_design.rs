//! Normalized-design quantities: L(Delta, eps), the largest admissible M^2
//! and the resulting floor as n grows.
//!
//! cargo run --release --example normalized_design

use isoquad::bounds::{find_m_sq, l_of_delta, normalized_floor};
use isoquad::constants::{constant, ConeSpec};
use isoquad::ensembles::{sample, EnsembleSpec};

fn main() -> isoquad::Result<()> {
    let (p, s, l, delta, eps, t) = (40, 2usize, 1.0, 0.25, 0.1, 2.0);
    let c4 = 3f64.powf(0.25);
    let big_l = l_of_delta(l, delta, eps)?;
    println!("L(Delta, eps) = {big_l:.4}");
    for n in [4e2, 1e5, 1e7, 1e9] {
        match find_m_sq(4.0, c4, t, n, p, delta)? {
            Some(m_sq) => println!("n = {n:e}: M^2 = {m_sq}, floor = {:.4}", normalized_floor(1.0, eps, big_l, s as f64, m_sq as f64)?),
            None => println!("n = {n:e}: no admissible M^2, bound vacuous"),
        }
    }

    let x = sample(&EnsembleSpec::laplace(p), 400, 9)?;
    let cone = ConeSpec::re((0..s).collect(), l);
    let raw = constant(&x.gram, &cone)?.value;
    let norm = constant(&x.gram_normalized, &cone)?.value;
    println!("kappa^2 on the raw Gram {raw:.4}, on the normalized Gram {norm:.4}");
    Ok(())
}
