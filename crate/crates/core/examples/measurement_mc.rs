//! Propagates measurement error through the estimator by redrawing the true
//! rate behind every detected pass, then compares the measurement share of
//! the variance with the design share.
//!
//! `cargo run --release --example measurement_mc [iterations]`

use std::path::Path;

use msinv::frame::SurveyPaths;
use msinv::measurement_mc::{convergence_trace, run_mc, McConfig};
use msinv::units::{kg_h_to_kt_y, var_kg_h_to_kt_y};

fn main() -> msinv::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/bc_subset");
    let frame = SurveyPaths::in_dir(&dir).load()?;

    let config = McConfig {
        iterations,
        seed: 7,
        trace: true,
        ..McConfig::default()
    };
    let result = run_mc(&frame, &config)?;
    let pop = &result.population;
    println!(
        "total {:.2} kt/y, measurement var {:.2}, design var {:.2}",
        kg_h_to_kt_y(pop.tau),
        var_kg_h_to_kt_y(pop.var_measurement),
        var_kg_h_to_kt_y(pop.parts.sum())
    );
    for s in &result.strata {
        let share = if s.var_total() > 0.0 { s.var_measurement / s.var_total() } else { 0.0 };
        println!("  {:<20} {:>8.3} kt/y  measurement share {:>5.1}%", s.name, kg_h_to_kt_y(s.tau), 100.0 * share);
    }

    // the running mean of the design variance settles well before the end
    let trace = convergence_trace(&result)?;
    let population: Vec<_> = trace.iter().filter(|p| p.stratum == "population").collect();
    for p in population.iter().step_by((iterations / 5).max(1)) {
        println!("  after {:>5}: {:.3}", p.b, var_kg_h_to_kt_y(p.cum_var_design));
    }
    Ok(())
}
