//! Regenerates the packaged survey subset under `data/bc_subset`.
//!
//! The subset is synthetic: facilities, components, survey days and passes
//! are drawn from a fixed seed, true pass rates are detected through the
//! POD curve, and detected passes record a noisy measurement. Components
//! emit intermittently: each has its own probability of being active on a
//! survey day, and inactive days produce only missed passes. Six strata
//! cover a low-emitting pair, a heavy-tailed gas plant stratum, compressor
//! stations, a stratum with no detections and wells.
//!
//! Run with `cargo run --example generate_subset [out_dir]`.

use std::path::PathBuf;

use msinv::frame::{self, ComponentRef, Pass, StratumDef, SurveyFrame};
use msinv::pod_model::{pod, PodParams};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};

const SEED: u64 = 20210915;
const CAMPAIGN_DAYS: usize = 60;
const SINGLE_DAY_COMPONENTS: usize = 17;
const PASSES_PMF: [f64; 5] = [0.30, 0.40, 0.18, 0.08, 0.04];

struct Spec {
    name: &'static str,
    n_sampled: u32,
    n_population: u32,
    facilities: usize,
    components: (u32, u32),
    median_rate: f64,
    sigma: f64,
    wells: bool,
}

const SPECS: [Spec; 6] = [
    Spec { name: "MS", n_sampled: 51, n_population: 91, facilities: 14, components: (1, 2), median_rate: 1.2, sigma: 0.6, wells: false },
    Spec { name: "CO SWB", n_sampled: 48, n_population: 58, facilities: 16, components: (1, 2), median_rate: 2.0, sigma: 0.7, wells: false },
    Spec { name: "GP Sweet", n_sampled: 21, n_population: 25, facilities: 12, components: (3, 8), median_rate: 8.0, sigma: 1.4, wells: false },
    Spec { name: "Compressor station", n_sampled: 45, n_population: 254, facilities: 20, components: (2, 7), median_rate: 12.0, sigma: 1.0, wells: false },
    Spec { name: "Recovery Scheme", n_sampled: 23, n_population: 27, facilities: 4, components: (1, 1), median_rate: 0.0, sigma: 0.0, wells: false },
    Spec { name: "Wells", n_sampled: 1004, n_population: 9978, facilities: 8, components: (1, 2), median_rate: 3.0, sigma: 0.8, wells: true },
];

struct Facility {
    id: String,
    site: String,
    stratum: usize,
    wells_at_site: u32,
    /// (id, mean rate, probability of emitting on a given day)
    components: Vec<(String, f64, f64)>,
    days: Vec<u32>,
}

fn main() -> msinv::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/bc_subset"));
    let seed = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = PodParams::default();
    let passes_per_day = WeightedIndex::new(PASSES_PMF).expect("valid pmf");
    let wind: Normal<f64> = Normal::new(3.5, 1.5).expect("valid normal");
    let altitude: Normal<f64> = Normal::new(140.0, 10.0).expect("valid normal");
    let day_factor = LogNormal::new(0.0, 0.5).expect("valid lognormal");
    let measurement = LogNormal::new(0.0, 0.25).expect("valid lognormal");

    let mut facilities = Vec::new();
    for (h, spec) in SPECS.iter().enumerate() {
        let mean = LogNormal::new(spec.median_rate.max(1e-9).ln(), spec.sigma.max(1e-9)).expect("valid lognormal");
        for f in 0..spec.facilities {
            let n = rng.random_range(spec.components.0..=spec.components.1);
            let id = format!("{}-{:02}", spec.name.replace(' ', "_").to_lowercase(), f + 1);
            let components = (0..n)
                .map(|c| {
                    let rate = if spec.median_rate > 0.0 { mean.sample(&mut rng) } else { 0.0 };
                    (format!("{id}-c{}", c + 1), rate, rng.random_range(0.4..1.0))
                })
                .collect();
            let n_days = if rng.random_bool(0.12) { 3 } else { 2 };
            let mut days = rand::seq::index::sample(&mut rng, CAMPAIGN_DAYS, n_days).into_vec();
            days.sort_unstable();
            facilities.push(Facility {
                site: format!("site-{id}"),
                id,
                stratum: h,
                wells_at_site: if spec.wells { rng.random_range(2..=6) } else { 0 },
                components,
                days: days.into_iter().map(|d| d as u32 + 1).collect(),
            });
        }
    }

    // Single-facility sites surveyed once, filled to the target count.
    let mut single = 0;
    for f in facilities.iter_mut().filter(|f| f.components.len() == 1) {
        if single == SINGLE_DAY_COMPONENTS {
            break;
        }
        f.days.truncate(1);
        single += 1;
    }
    assert_eq!(single, SINGLE_DAY_COMPONENTS, "not enough one-component facilities");

    let mut components = Vec::new();
    let mut passes = Vec::new();
    for f in &facilities {
        let spec = &SPECS[f.stratum];
        for &day in &f.days {
            let q = passes_per_day.sample(&mut rng) as u32 + 1;
            for (cid, rate, active) in &f.components {
                let on = rng.random_bool(*active);
                let daily = if on { rate * day_factor.sample(&mut rng) } else { 0.0 };
                for k in 1..=q {
                    let true_rate = (daily * (1.0 + 0.25 * rng.sample::<f64, _>(rand_distr::StandardNormal))).max(0.0);
                    let u = wind.sample(&mut rng).max(0.0);
                    let a = altitude.sample(&mut rng).max(50.0);
                    let phi = pod(true_rate, a, u, &params)?;
                    if rng.random_bool(phi) {
                        let measured = true_rate / 0.918 * measurement.sample(&mut rng);
                        passes.push(Pass::hit(cid.clone(), day, k, round3(measured).max(0.001), round3(u), round3(a)));
                    } else {
                        passes.push(Pass::miss(cid.clone(), day, k));
                    }
                }
            }
        }
        for (cid, _, _) in &f.components {
            let (facility_id, is_well) = if spec.wells {
                (format!("{cid}-well"), true)
            } else {
                (f.id.clone(), false)
            };
            components.push(ComponentRef {
                component_id: cid.clone(),
                facility_id,
                site_id: f.site.clone(),
                stratum: spec.name.to_string(),
                is_well,
                wells_at_site: f.wells_at_site,
            });
        }
    }
    let strata = SPECS
        .iter()
        .map(|s| StratumDef {
            name: s.name.to_string(),
            n_sampled: s.n_sampled,
            n_population: s.n_population,
        })
        .collect();
    let frame = SurveyFrame::new(strata, components, passes)?;
    let paths = frame::write_survey(&frame, &out)?;
    let diag = frame::validate(&frame);
    println!("wrote {} ({} passes)", paths.passes.display(), frame.passes().len());
    println!("median passes per day: {}", frame::median_passes_per_day(&frame));
    for m in diag.messages() {
        println!("{m}");
    }
    Ok(())
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}
