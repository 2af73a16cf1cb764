//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use msinv::frame::{ComponentRef, Pass, StratumDef, SurveyFrame, SurveyPaths};
use msinv::pod_model::PodParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn subset() -> SurveyFrame {
    SurveyPaths::in_dir(&data_dir().join("bc_subset")).load().expect("packaged subset loads")
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Small random survey frame: one to three ordinary strata plus, half the
/// time, a wells stratum. Some components never get detected and some
/// facilities are surveyed on a single day.
pub fn random_frame(seed: u64) -> SurveyFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata = Vec::new();
    let mut components = Vec::new();
    let mut passes = Vec::new();

    let add_days = |rng: &mut ChaCha8Rng, ids: &[String], passes: &mut Vec<Pass>| {
        let n_days = rng.random_range(1..=3);
        let days = rand::seq::index::sample(rng, 20, n_days).into_vec();
        for day in days {
            let q = rng.random_range(1..=4u32);
            for id in ids {
                let silent = rng.random_bool(0.15);
                for k in 1..=q {
                    let rate = rng.random_range(0.0..4.0f64).exp();
                    let wind = rng.random_range(0.5..7.0);
                    let alt = rng.random_range(120.0..160.0);
                    // detected with the curve's own probability, as in a real survey
                    if !silent && rng.random_bool(PodParams::default().eval(rate, alt, wind)) {
                        passes.push(Pass::hit(id.clone(), day as u32 + 1, k, rate, wind, alt));
                    } else {
                        passes.push(Pass::miss(id.clone(), day as u32 + 1, k));
                    }
                }
            }
        }
    };

    let n_strata = rng.random_range(1..=3);
    for h in 0..n_strata {
        let name = format!("S{h}");
        let n_sampled = rng.random_range(2..=6u32);
        let n_population = n_sampled + rng.random_range(0..=10u32);
        strata.push(StratumDef {
            name: name.clone(),
            n_sampled,
            n_population,
        });
        for f in 0..rng.random_range(1..=n_sampled) {
            let fid = format!("{name}-f{f}");
            let ids: Vec<String> = (0..rng.random_range(1..=3)).map(|c| format!("{fid}-c{c}")).collect();
            for id in &ids {
                components.push(ComponentRef {
                    component_id: id.clone(),
                    facility_id: fid.clone(),
                    site_id: fid.clone(),
                    stratum: name.clone(),
                    is_well: false,
                    wells_at_site: 0,
                });
            }
            add_days(&mut rng, &ids, &mut passes);
        }
    }

    if rng.random_bool(0.5) {
        let name = "W".to_string();
        let mut total_wells = 0;
        for s in 0..rng.random_range(1..=2) {
            let site = format!("site{s}");
            let wells = rng.random_range(1..=3u32);
            total_wells += wells;
            let ids: Vec<String> = (0..rng.random_range(1..=wells)).map(|c| format!("{site}-w{c}")).collect();
            for id in &ids {
                components.push(ComponentRef {
                    component_id: id.clone(),
                    facility_id: format!("{id}-well"),
                    site_id: site.clone(),
                    stratum: name.clone(),
                    is_well: true,
                    wells_at_site: wells,
                });
            }
            add_days(&mut rng, &ids, &mut passes);
        }
        let n_sampled = total_wells + rng.random_range(0..=3);
        strata.push(StratumDef {
            name,
            n_sampled,
            n_population: n_sampled + rng.random_range(0..=20),
        });
    }
    SurveyFrame::new(strata, components, passes).expect("random frame is valid")
}
