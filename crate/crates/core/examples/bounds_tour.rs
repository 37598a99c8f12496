//! Evaluates every named bound at one parameter set, then shows how the
//! lower margin shrinks with n.
//!
//! cargo run --release --example bounds_tour

use isoquad::bounds::{evaluate, lower_margin, BoundParams, EVALUATORS};

fn main() -> isoquad::Result<()> {
    let mut params = BoundParams::default();
    params.set("m", 4.0)?;
    params.set("Cm", 3f64.powf(0.25))?;
    params.set("n", 10_000.0)?;
    params.set("p", 50.0)?;
    params.set("t", 2.0)?;
    params.set("kappa_star_sq", 0.8)?;
    params.set("m_sq", 40.0)?;

    for name in EVALUATORS {
        match evaluate(name, &params) {
            Ok(r) => println!("{name:>22}  {:>14.6}{}", r.value, if r.void { "  (void)" } else { "" }),
            Err(e) => println!("{name:>22}  n/a: {e}"),
        }
    }

    println!();
    let dn = params.delta_n_value();
    for n in [1e3f64, 1e4, 1e5, 1e6, 1e7] {
        let v = lower_margin(params.m, params.c_m, 2.0, dn * (1e4 / n).sqrt(), params.t, n)?;
        println!("n = {n:>9.0}: lower margin {v:.5}");
    }
    Ok(())
}
