//! Structural checks on a survey frame: single-day components, strata with
//! no detections and how likely each surveyed component-day was to show up.
//!
//! `cargo run --example diagnose_frame [survey_dir]`

use std::path::PathBuf;

use msinv::frame::{median_passes_per_day, validate, SurveyPaths};
use msinv::planner::{gamma_table, quantile};
use msinv::pod_model::PodParams;

fn main() -> msinv::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/bc_subset"));
    let frame = SurveyPaths::in_dir(&dir).load()?;
    let diag = validate(&frame);

    println!(
        "{} components, {} passes, median {} passes per day",
        frame.components().len(),
        frame.passes().len(),
        median_passes_per_day(&frame)
    );
    println!("single-day components: {}", diag.single_day_components.len());
    println!("strata without detections: {:?}", diag.zero_emitting_strata);
    println!("small strata: {:?}", diag.small_strata);

    let gammas: Vec<f64> = gamma_table(&frame, &PodParams::default())?.iter().map(|g| g.gamma).collect();
    for p in [0.0, 0.25, 0.5, 0.75] {
        println!("gamma q{p:.2}: {:.3}", quantile(&gammas, p).unwrap_or(f64::NAN));
    }
    Ok(())
}
