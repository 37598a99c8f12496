//! Draws from each shipped ensemble and compares the empirical Gram matrix
//! with the population covariance.
//!
//! cargo run --release --example sample_ensembles

use isoquad::ensembles::{ensemble_constants, population_covariance, sample, EnsembleSpec, Innovation};

fn main() -> isoquad::Result<()> {
    let b = vec![vec![0.0, 0.5, 0.2], vec![0.0, 0.0, -0.4], vec![0.0; 3]];
    let specs = [
        EnsembleSpec::gaussian(3),
        EnsembleSpec::rademacher(3),
        EnsembleSpec::laplace(3),
        EnsembleSpec::student_t(3, 6.0),
        EnsembleSpec::sem_dag(b.clone(), vec![1.0; 3]).with_innovation(Innovation::Laplace),
        EnsembleSpec::sem_arch(b, vec![1.0; 3], 0.3),
    ];
    for spec in specs {
        let x = sample(&spec, 20_000, 1)?;
        let pop = population_covariance(&spec)?;
        let err = x.gram.as_slice().iter().zip(pop.as_slice()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let k = ensemble_constants(&spec)?;
        println!("{:>12}  max |Gram - Sigma0| = {err:.4}  C_m = {:?}  sigma_X = {:?}", format!("{:?}", spec.variant), k.c_m, k.sigma_x);
    }
    Ok(())
}
