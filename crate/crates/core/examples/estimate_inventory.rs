//! Bias-corrected design-based totals for the packaged subset, with a stage
//! breakdown per stratum and a 95% interval, under both day horizons.
//!
//! `cargo run --example estimate_inventory`

use std::path::Path;

use msinv::design::Horizon;
use msinv::estimators::{total_inventory, wald_ci, EstimationConfig, Estimator};
use msinv::frame::SurveyPaths;
use msinv::pod_model::{MeasurementModel, PodParams};
use msinv::units::{kg_h_to_kt_y, var_kg_h_to_kt_y};

fn main() -> msinv::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/bc_subset");
    let frame = SurveyPaths::in_dir(&dir).load()?;
    let factor = MeasurementModel::default().bias;

    for horizon in [Horizon::Fixed(365), Horizon::Observed] {
        for estimator in [Estimator::Ipw, Estimator::Hajek] {
            let config = EstimationConfig::new(estimator, horizon);
            let est = total_inventory(&frame, &PodParams::default(), factor, &config)?;
            let total = kg_h_to_kt_y(est.total);
            let var = var_kg_h_to_kt_y(est.parts.sum());
            let (lo, hi) = wald_ci(total, var, 0.95)?;
            println!("{} / {}: {total:.2} kt/y  [{lo:.2}, {hi:.2}]", estimator.label(), horizon.label());
            for s in &est.strata {
                let p = s.parts;
                println!(
                    "    {:<20} {:>8.3}   I {:>8.4}  II {:>8.4}  III {:>8.4}",
                    s.name,
                    kg_h_to_kt_y(s.total),
                    var_kg_h_to_kt_y(p.stage1),
                    var_kg_h_to_kt_y(p.stage2),
                    var_kg_h_to_kt_y(p.stage3),
                );
            }
            if !est.diagnostics.pooled_without_peers.is_empty() {
                println!("    single-day components without peers: {:?}", est.diagnostics.pooled_without_peers);
            }
        }
    }
    Ok(())
}
