//! Runs the default simulation study and compares the full-year and
//! observed-days variants by coverage.
//!
//! `cargo run --release --example simulation_study [replications]`

use msinv::cli::DEFAULT_SIM_CONFIG;
use msinv::estimators::Estimator;
use msinv::simlab::{run_study, SimConfig};

fn main() -> msinv::Result<()> {
    let mut config = SimConfig::from_toml(DEFAULT_SIM_CONFIG)?;
    if let Some(r) = std::env::args().nth(1).and_then(|s| s.parse().ok()) {
        config.replications = r;
    }
    let result = run_study(&config)?;
    println!("{:<20} {:<14} {:>8} {:>9} {:>12}", "stratum", "variant", "bias %", "coverage", "var");
    for r in &result.rows {
        println!(
            "{:<20} {:<14} {:>8.2} {:>9.3} {:>12.4e}",
            r.stratum, r.variant, r.bias_pct, r.coverage, r.var
        );
    }
    for name in &result.names {
        for est in [Estimator::Ipw, Estimator::Hajek] {
            if let Some(gap) = result.coverage_gap(name, est) {
                println!(
                    "{name} {}: year minus observed coverage {:+.3} (se {:.3})",
                    est.label(),
                    gap.difference,
                    gap.se
                );
            }
        }
    }
    Ok(())
}
