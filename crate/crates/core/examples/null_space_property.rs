//! Null space property through the compatibility constant at L = 1: it
//! holds for a generic short design and fails once a null vector is planted.
//!
//! cargo run --release --example null_space_property

use isoquad::constants::null_space_check;
use isoquad::ensembles::{sample, DesignSample, EnsembleSpec};

fn main() -> isoquad::Result<()> {
    let (n, p) = (12, 20);
    let x = sample(&EnsembleSpec::gaussian(p), n, 5)?;
    println!("random {n}x{p} design, S = {{0}}: {}", null_space_check(&x.gram, &[0])?);
    println!("random {n}x{p} design, S = {{0..5}}: {}", null_space_check(&x.gram, &(0..6).collect::<Vec<_>>())?);

    // duplicate column 0 into column 1: e_0 - e_1 is a null vector with equal mass on and off S
    let mut data = x.x.clone();
    for row in data.chunks_mut(p) {
        row[1] = row[0];
    }
    let dup = DesignSample::from_data(n, p, data)?;
    println!("column 1 = column 0, S = {{0}}: {}", null_space_check(&dup.gram, &[0])?);
    Ok(())
}
