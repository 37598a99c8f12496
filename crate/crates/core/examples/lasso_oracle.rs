//! Fits the Lasso by coordinate descent and checks the oracle inequality
//! against the compatibility constant.
//!
//! cargo run --release --example lasso_oracle

use isoquad::ensembles::EnsembleSpec;
use isoquad::verify::{oracle_inequality_check, problem_compat, LassoProblem};

fn main() -> isoquad::Result<()> {
    let spec = EnsembleSpec::gaussian(40);
    for seed in 0..5 {
        let prob = LassoProblem::seeded(&spec, 120, &[0, 1, 2], 1.0, 1.0, 2.0, None, seed)?;
        let compat = problem_compat(&prob)?.unwrap_or(0.0);
        let rec = oracle_inequality_check(&prob, compat)?;
        let fit = rec.fit.as_ref().expect("fit");
        println!(
            "seed {seed}: lambda {:.4} (lambda0 {:.4})  lhs {:.4} <= rhs {:.4}  {:?}  kkt {:.1e}  gap {:.1e}",
            rec.lambda,
            rec.lambda0,
            rec.lhs.unwrap_or(f64::NAN),
            rec.rhs.unwrap_or(f64::NAN),
            rec.status,
            fit.kkt_residual,
            fit.duality_gap
        );
    }
    Ok(())
}
