//! Predicts the stage-wise variance of a planned survey and shows how it
//! moves as more days per facility are flown.
//!
//! `cargo run --example plan_survey`

use std::path::Path;

use msinv::estimators::Estimator;
use msinv::planner::{predict_variance, PlanScenario};

fn main() -> msinv::Result<()> {
    let base = PlanScenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/plan_scenario.json"))?;
    println!("{:>4} {:>14} {:>14} {:>14}", "d", "I (kg/h)^2", "II", "III");
    for days_sampled in [1, 2, 4, 8, 16] {
        let scenario = PlanScenario { days_sampled, ..base.clone() };
        let rows = predict_variance(&scenario, Estimator::Ipw)?;
        let sum = |f: fn(&msinv::planner::PlanRow) -> f64| rows.iter().map(f).sum::<f64>();
        println!(
            "{days_sampled:>4} {:>14.1} {:>14.1} {:>14.1}",
            sum(|r| r.stage1),
            sum(|r| r.stage2),
            sum(|r| r.stage3)
        );
    }
    Ok(())
}
