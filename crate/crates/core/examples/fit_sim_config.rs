//! Fits the default simulation configuration from the packaged subset and
//! writes it to `data/sim_default.toml`.
//!
//! Rates are bias-corrected before the lognormal moments are matched.
//!
//! Run with `cargo run --example fit_sim_config [out.toml]`.

use std::path::PathBuf;

use msinv::frame::SurveyPaths;
use msinv::pod_model::MeasurementModel;
use msinv::simlab::{fit_config_from_frame, SimConfig};

const STRATA: [&str; 4] = ["CO SWB", "MS", "GP Sweet", "Compressor station"];

fn main() -> msinv::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| root.join("data/sim_default.toml"));
    let frame = SurveyPaths::in_dir(&root.join("data/bc_subset")).load()?;
    let base = SimConfig {
        seed: 2021,
        ..SimConfig::default()
    };
    let cfg = fit_config_from_frame(&frame, &STRATA, MeasurementModel::default().bias, &base)?;
    let text = format!(
        "# Fitted from data/bc_subset by `cargo run --example fit_sim_config`.\n{}",
        cfg.to_toml()?
    );
    std::fs::write(&out, text).map_err(|e| msinv::Error::Config(format!("{}: {e}", out.display())))?;
    for s in &cfg.strata {
        println!(
            "{:<20} mu {:>7.3} sigma {:.3} sd_ratio {:.3} mean {:.2} kg/h",
            s.name,
            s.lognormal_mu,
            s.lognormal_sigma,
            s.sd_ratio,
            s.expected_rate()
        );
    }
    println!("passes pmf {:?}", cfg.passes_pmf);
    println!("wrote {}", out.display());
    Ok(())
}
