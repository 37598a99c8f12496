//! Runs the shipped default experiment config and prints one line per rule.
//!
//! cargo run --release --example monte_carlo_suite [config.json]

use isoquad::verify::{run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/default.json").into());
    let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let report = run_experiment(&cfg)?;
    for c in &report.checks {
        println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.check);
        for r in &c.rules {
            println!("    {:<28} {:?}  observed {:.4}  threshold {:.4}", r.rule, r.kind, r.observed, r.threshold);
        }
    }
    println!("overall: {}", if report.passed { "pass" } else { "fail" });
    Ok(())
}
