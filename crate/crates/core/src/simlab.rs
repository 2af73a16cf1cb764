//! Simulation study of the estimators on synthetic stratified populations.
//!
//! A population of facilities is generated once per seed: each facility
//! gets a uniform number of components, each component emits with a fixed
//! probability, and emitting components draw a lognormal mean rate for
//! every day of the horizon. Each replication then samples facilities by
//! stratified SRS, `days_sampled` days per emitting component by SRS, a
//! number of passes per day, pass rates normal around the daily mean, wind
//! and altitude, and detects each pass with its POD. All four estimator
//! variants run on the same replication.

use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Horizon;
use crate::error::{Error, Result};
use crate::frame::SurveyFrame;
use crate::estimators::{
    estimate, wald_ci, DaySample, Detection, EstimationConfig, Estimator, SampleData, StratumSample, UnitSample,
};
use crate::pod_model::{pod, PodParams};
use crate::sum::{csum, CompensatedSum};
use crate::units::kg_h_to_kt_y;

/// Moment-matched lognormal parameters `(mu, sigma)` for a mean and
/// variance.
pub fn fit_lognormal_moments(mean: f64, var: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0 && var > 0.0 && mean.is_finite() && var.is_finite()) {
        return Err(Error::Domain(format!(
            "lognormal moments need positive mean and variance, got {mean} and {var}"
        )));
    }
    let sigma2 = (var / (mean * mean)).ln_1p();
    Ok((mean.ln() - sigma2 / 2.0, sigma2.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimStratumSpec {
    pub name: String,
    pub n_population: u32,
    pub n_sampled: u32,
    pub lognormal_mu: f64,
    pub lognormal_sigma: f64,
    /// Pass-level SD as a fraction of the daily mean.
    pub sd_ratio: f64,
}

impl SimStratumSpec {
    pub fn expected_rate(&self) -> f64 {
        (self.lognormal_mu + self.lognormal_sigma * self.lognormal_sigma / 2.0).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub replications: usize,
    pub days: u32,
    pub days_sampled: u32,
    pub components_min: u32,
    pub components_max: u32,
    pub emit_prob: f64,
    /// Probabilities of 1..=5 passes per day.
    pub passes_pmf: Vec<f64>,
    pub wind_mean: f64,
    pub wind_sd: f64,
    pub altitude_mean: f64,
    pub altitude_sd: f64,
    pub ci_level: f64,
    /// Replaces every detection probability when set.
    pub force_phi: Option<f64>,
    pub pod: PodParams,
    pub strata: Vec<SimStratumSpec>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            replications: 5000,
            days: 365,
            days_sampled: 2,
            components_min: 1,
            components_max: 50,
            emit_prob: 0.055,
            passes_pmf: vec![0.25, 0.40, 0.20, 0.10, 0.05],
            wind_mean: 3.5,
            wind_sd: 1.5,
            altitude_mean: 140.0,
            altitude_sd: 10.0,
            ci_level: 0.95,
            force_phi: None,
            pod: PodParams::default(),
            strata: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("simulation config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("simulation config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.emit_prob) {
            return fail(format!("emit_prob must lie in [0, 1], got {}", self.emit_prob));
        }
        if self.passes_pmf.len() != 5
            || self.passes_pmf.iter().any(|p| !(*p >= 0.0))
            || (self.passes_pmf.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return fail("passes_pmf needs five nonnegative probabilities summing to 1".into());
        }
        if self.days_sampled < 1 || self.days_sampled > self.days {
            return fail(format!(
                "need 1 <= days_sampled <= days, got {} and {}",
                self.days_sampled, self.days
            ));
        }
        if self.components_min < 1 || self.components_min > self.components_max {
            return fail("need 1 <= components_min <= components_max".into());
        }
        if self.replications < 2 {
            return fail("need at least 2 replications".into());
        }
        if !(self.wind_sd >= 0.0 && self.altitude_sd >= 0.0 && self.altitude_mean > 0.0) {
            return fail("wind and altitude distributions are invalid".into());
        }
        if let Some(phi) = self.force_phi {
            if !(phi > 0.0 && phi <= 1.0) {
                return fail(format!("force_phi must lie in (0, 1], got {phi}"));
            }
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return fail(format!("ci_level must lie in (0, 1), got {}", self.ci_level));
        }
        for s in &self.strata {
            if s.n_sampled < 1 || s.n_sampled > s.n_population || !(s.lognormal_sigma > 0.0) || !(s.sd_ratio >= 0.0) {
                return fail(format!("stratum {:?} has invalid parameters", s.name));
            }
        }
        self.pod.validate()
    }
}

/// Empirical frequencies of 1..=5 passes per component-day; days with more
/// than five passes count as five.
pub fn passes_pmf_from_frame(frame: &SurveyFrame) -> Vec<f64> {
    let mut counts = [0usize; 5];
    for ci in 0..frame.components().len() {
        for b in frame.component_days(ci) {
            counts[(b.q_total().clamp(1, 5) - 1) as usize] += 1;
        }
    }
    let n: usize = counts.iter().sum();
    counts.iter().map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 }).collect()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = csum(values.iter().copied()) / n;
    let var = csum(values.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Simulation settings fitted from a survey frame.
///
/// For each named stratum, the mean detected rate of each component-day
/// (scaled by `rate_factor`) gives the lognormal moments, and the mean
/// within-day coefficient of variation over days with two or more detections
/// gives `sd_ratio`. Wind and altitude moments come from all detected
/// passes, the pass-count pmf from all component-days. Population and
/// sample sizes are taken from the frame's strata.
pub fn fit_config_from_frame(
    frame: &SurveyFrame,
    strata: &[&str],
    rate_factor: f64,
    base: &SimConfig,
) -> Result<SimConfig> {
    let mut winds = Vec::new();
    let mut altitudes = Vec::new();
    for p in frame.passes().iter().filter(|p| p.detected) {
        winds.extend(p.wind_speed);
        altitudes.extend(p.altitude);
    }
    if winds.len() < 2 {
        return Err(Error::Estimation("need at least two detected passes to fit".into()));
    }
    let (wind_mean, wind_sd) = mean_sd(&winds);
    let (altitude_mean, altitude_sd) = mean_sd(&altitudes);

    let mut specs = Vec::with_capacity(strata.len());
    for &name in strata {
        let def = frame
            .stratum(name)
            .ok_or_else(|| Error::Config(format!("stratum {name:?} is not in the frame")))?;
        let mut day_means = Vec::new();
        let mut cvs = Vec::new();
        for (ci, c) in frame.components().iter().enumerate() {
            if c.stratum != name {
                continue;
            }
            for b in frame.component_days(ci) {
                let rates: Vec<f64> = frame
                    .day_passes(b)
                    .iter()
                    .filter_map(|p| p.measured_rate)
                    .map(|r| r * rate_factor)
                    .collect();
                if rates.is_empty() {
                    continue;
                }
                let (m, sd) = mean_sd(&rates);
                day_means.push(m);
                if rates.len() >= 2 && m > 0.0 {
                    cvs.push(sd / m);
                }
            }
        }
        if day_means.len() < 2 {
            return Err(Error::Estimation(format!(
                "stratum {name:?} has fewer than two component-days with detections"
            )));
        }
        let (mean, sd) = mean_sd(&day_means);
        let (mu, sigma) = fit_lognormal_moments(mean, sd * sd)?;
        specs.push(SimStratumSpec {
            name: name.to_string(),
            n_population: def.n_population,
            n_sampled: def.n_sampled,
            lognormal_mu: mu,
            lognormal_sigma: sigma,
            sd_ratio: if cvs.is_empty() { 0.0 } else { csum(cvs.iter().copied()) / cvs.len() as f64 },
        });
    }
    let cfg = SimConfig {
        passes_pmf: passes_pmf_from_frame(frame),
        wind_mean,
        wind_sd,
        altitude_mean,
        altitude_sd,
        strata: specs,
        ..base.clone()
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFacility {
    pub components: u32,
    /// Daily mean rates of each emitting component, one per horizon day.
    pub emitters: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStratum {
    pub name: String,
    pub n_sampled: u32,
    pub facilities: Vec<SimFacility>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPopulation {
    pub days: u32,
    pub strata: Vec<SimStratum>,
}

impl SimPopulation {
    /// True stratum totals, kg/h.
    pub fn stratum_totals(&self) -> Vec<f64> {
        let d = self.days as f64;
        self.strata
            .iter()
            .map(|s| csum(s.facilities.iter().flat_map(|f| &f.emitters).map(|e| csum(e.iter().copied()) / d)))
            .collect()
    }

    pub fn total(&self) -> f64 {
        csum(self.stratum_totals())
    }
}

pub fn generate_population(config: &SimConfig, seed: u64) -> Result<SimPopulation> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strata = config
        .strata
        .iter()
        .map(|spec| {
            let daily = LogNormal::new(spec.lognormal_mu, spec.lognormal_sigma)
                .map_err(|e| Error::Config(format!("stratum {:?}: {e}", spec.name)))?;
            let facilities = (0..spec.n_population)
                .map(|_| {
                    let components = rng.random_range(config.components_min..=config.components_max);
                    let mut emitters: Vec<Vec<f64>> = Vec::new();
                    for _ in 0..components {
                        if rng.random_bool(config.emit_prob) {
                            emitters.push((0..config.days).map(|_| daily.sample(&mut rng)).collect());
                        }
                    }
                    SimFacility { components, emitters }
                })
                .collect();
            Ok(SimStratum {
                name: spec.name.clone(),
                n_sampled: spec.n_sampled,
                facilities,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimPopulation {
        days: config.days,
        strata,
    })
}

/// Normal draw truncated at `lower` by resampling; after 100 rejections
/// the value is clamped and the clamp reported.
fn truncated_normal(rng: &mut ChaCha8Rng, dist: &Normal<f64>, lower: f64, strict: bool) -> (f64, bool) {
    for _ in 0..100 {
        let x = dist.sample(rng);
        if x > lower || (!strict && x == lower) {
            return (x, false);
        }
    }
    (lower, true)
}

fn normal(mean: f64, sd: f64) -> Result<Normal<f64>> {
    Normal::new(mean, sd).map_err(|e| Error::Config(format!("normal({mean}, {sd}): {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub estimator: Estimator,
    /// True for `D = d_p`, false for the full horizon.
    pub observed_days: bool,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant {
            estimator: Estimator::Ipw,
            observed_days: false,
        },
        Variant {
            estimator: Estimator::Ipw,
            observed_days: true,
        },
        Variant {
            estimator: Estimator::Hajek,
            observed_days: false,
        },
        Variant {
            estimator: Estimator::Hajek,
            observed_days: true,
        },
    ];

    pub fn label(&self) -> String {
        format!(
            "{}_{}",
            self.estimator.label(),
            if self.observed_days { "observed" } else { "year" }
        )
    }

    fn config(&self, days: u32, ci_level: f64) -> EstimationConfig {
        EstimationConfig {
            ci_level,
            ..EstimationConfig::new(
                self.estimator,
                if self.observed_days {
                    Horizon::Observed
                } else {
                    Horizon::Fixed(days)
                },
            )
        }
    }
}

/// Per-replication (estimate, variance, covered) for every stratum then the
/// population, per variant.
type Replication = (Vec<Vec<(f64, f64, bool)>>, u64);

fn replicate(pop: &SimPopulation, config: &SimConfig, truth: &[f64], rep: u64) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(rep + 1);
    let passes = WeightedIndex::new(&config.passes_pmf).map_err(|e| Error::Config(format!("passes_pmf: {e}")))?;
    let wind = normal(config.wind_mean, config.wind_sd)?;
    let altitude = normal(config.altitude_mean, config.altitude_sd)?;
    let mut clamps = 0u64;
    let mut labels = Vec::new();
    let mut strata = Vec::with_capacity(pop.strata.len());
    let mut facility_id = 0u32;
    for (s, spec) in pop.strata.iter().zip(&config.strata) {
        let chosen = rand::seq::index::sample(&mut rng, s.facilities.len(), s.n_sampled as usize).into_vec();
        let mut chosen = chosen;
        chosen.sort_unstable();
        let mut units = Vec::new();
        for &f in &chosen {
            for daily in &s.facilities[f].emitters {
                let mut days = rand::seq::index::sample(&mut rng, pop.days as usize, config.days_sampled as usize)
                    .into_vec();
                days.sort_unstable();
                let days = days
                    .into_iter()
                    .map(|t| -> Result<DaySample> {
                        let q = passes.sample(&mut rng) as u32 + 1;
                        let mean = daily[t];
                        let rate_dist = normal(mean, spec.sd_ratio * mean)?;
                        let mut detections = Vec::new();
                        for _ in 0..q {
                            let (rate, c1) = truncated_normal(&mut rng, &rate_dist, 0.0, false);
                            let (u, c2) = truncated_normal(&mut rng, &wind, 0.0, false);
                            let (a, c3) = truncated_normal(&mut rng, &altitude, 0.0, true);
                            clamps += (c1 || c2 || c3) as u64;
                            let a = if c3 { config.altitude_mean.max(1.0) } else { a };
                            let phi = match config.force_phi {
                                Some(p) => p,
                                None => pod(rate, a, u, &config.pod)?,
                            };
                            if rng.random_bool(phi.clamp(0.0, 1.0)) {
                                detections.push(Detection::new(rate, phi));
                            }
                        }
                        Ok(DaySample {
                            day: t as u32,
                            q_total: q,
                            detections,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                units.push(UnitSample {
                    label: labels.len(),
                    facility: facility_id + f as u32,
                    site: facility_id + f as u32,
                    wells_at_site: None,
                    days,
                });
                labels.push(format!("{}#{f}", s.name));
            }
        }
        facility_id += s.facilities.len() as u32;
        strata.push(StratumSample {
            name: s.name.clone(),
            n_sampled: s.n_sampled,
            n_population: s.facilities.len() as u32,
            units,
        });
    }
    let sample = SampleData {
        strata,
        labels: Arc::new(labels),
    };
    let population_truth = csum(truth.iter().copied());
    let mut out = Vec::with_capacity(Variant::ALL.len());
    for v in Variant::ALL {
        let est = estimate(&sample, &v.config(config.days, config.ci_level))?;
        let mut rows = Vec::with_capacity(est.strata.len() + 1);
        let mut push = |total: f64, var: f64, truth: f64| -> Result<()> {
            let (lo, hi) = wald_ci(total, var, config.ci_level)?;
            rows.push((total, var, lo <= truth && truth <= hi));
            Ok(())
        };
        for (s, t) in est.strata.iter().zip(truth) {
            push(s.total, s.parts.sum(), *t)?;
        }
        push(est.total, est.parts.sum(), population_truth)?;
        out.push(rows);
    }
    Ok((out, clamps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub stratum: String,
    pub variant: String,
    /// Percent bias of the mean estimate relative to the true total.
    pub bias_pct: f64,
    /// Variance of the estimates over replications (divisor R - 1), (kt/y)^2.
    pub var: f64,
    /// `var + bias^2`, (kt/y)^2.
    pub mse: f64,
    pub coverage: f64,
    /// Monte Carlo standard errors of `bias_pct` and `coverage`.
    pub bias_pct_se: f64,
    pub coverage_se: f64,
    /// True total, kt/y.
    pub truth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudyResult {
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<SimMetrics>,
    /// Pass draws that hit the resampling limit and were clamped.
    pub clamped_draws: u64,
    /// Row names in the order of `per_rep`'s innermost index.
    pub names: Vec<String>,
    /// `[replication][variant][row]` = (estimate kg/h, variance, covered),
    /// variants in [`Variant::ALL`] order.
    #[serde(skip)]
    pub per_rep: Vec<Vec<Vec<(f64, f64, bool)>>>,
}

/// Difference between two variants on the same replications, with its
/// paired Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDifference {
    pub difference: f64,
    pub se: f64,
}

impl SimStudyResult {
    pub fn row(&self, stratum: &str, variant: &str) -> Option<&SimMetrics> {
        self.rows.iter().find(|r| r.stratum == stratum && r.variant == variant)
    }

    fn paired(&self, stratum: &str, a: Variant, b: Variant, f: impl Fn((f64, f64, bool)) -> f64) -> Option<PairedDifference> {
        let h = self.names.iter().position(|n| n == stratum)?;
        let ia = Variant::ALL.iter().position(|v| *v == a)?;
        let ib = Variant::ALL.iter().position(|v| *v == b)?;
        if self.per_rep.len() < 2 {
            return None;
        }
        let diffs: Vec<f64> = self.per_rep.iter().map(|r| f(r[ia][h]) - f(r[ib][h])).collect();
        let n = diffs.len() as f64;
        let mean = csum(diffs.iter().copied()) / n;
        let var = csum(diffs.iter().map(|d| (d - mean) * (d - mean))) / (n - 1.0);
        Some(PairedDifference {
            difference: mean,
            se: (var / n).sqrt(),
        })
    }

    /// Coverage of the full-horizon variant minus that of the `D = d_p`
    /// variant for one estimator.
    pub fn coverage_gap(&self, stratum: &str, estimator: Estimator) -> Option<PairedDifference> {
        let year = Variant {
            estimator,
            observed_days: false,
        };
        let observed = Variant {
            estimator,
            observed_days: true,
        };
        self.paired(stratum, year, observed, |(_, _, c)| c as u8 as f64)
    }

    /// Percent bias of the ratio estimator minus that of IPW.
    pub fn bias_shift_pct(&self, stratum: &str) -> Option<PairedDifference> {
        let truth = self.row(stratum, &Variant::ALL[0].label())?.truth;
        if truth == 0.0 {
            return None;
        }
        let scale = 100.0 / truth;
        let d = self.paired(stratum, Variant::ALL[2], Variant::ALL[0], |(t, _, _)| kg_h_to_kt_y(t))?;
        Some(PairedDifference {
            difference: d.difference * scale,
            se: d.se * scale.abs(),
        })
    }
}

fn metrics(stratum: &str, variant: &str, truth: f64, values: &[(f64, f64, bool)]) -> SimMetrics {
    let r = values.len() as f64;
    let truth_kt = kg_h_to_kt_y(truth);
    let est: Vec<f64> = values.iter().map(|v| kg_h_to_kt_y(v.0)).collect();
    let mean = csum(est.iter().copied()) / r;
    let var = csum(est.iter().map(|x| (x - mean) * (x - mean))) / (r - 1.0);
    let bias = mean - truth_kt;
    let coverage = values.iter().filter(|v| v.2).count() as f64 / r;
    let scale = if truth_kt != 0.0 { 100.0 / truth_kt } else { 0.0 };
    SimMetrics {
        stratum: stratum.to_string(),
        variant: variant.to_string(),
        bias_pct: bias * scale,
        var,
        mse: var + bias * bias,
        coverage,
        bias_pct_se: (var / r).sqrt() * scale.abs(),
        coverage_se: (coverage * (1.0 - coverage) / r).sqrt(),
        truth: truth_kt,
    }
}

/// Runs the study on a population generated from `config.seed`.
pub fn run_study(config: &SimConfig) -> Result<SimStudyResult> {
    let pop = generate_population(config, config.seed)?;
    run_study_on(&pop, config)
}

pub fn run_study_on(pop: &SimPopulation, config: &SimConfig) -> Result<SimStudyResult> {
    config.validate()?;
    let truth = pop.stratum_totals();
    let reps: Vec<Replication> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| replicate(pop, config, &truth, r))
        .collect::<Result<Vec<_>>>()?;

    let mut names: Vec<&str> = pop.strata.iter().map(|s| s.name.as_str()).collect();
    names.push("population");
    let mut truths = truth.clone();
    truths.push(csum(truth.iter().copied()));
    let mut rows = Vec::new();
    for (h, name) in names.iter().enumerate() {
        for (vi, v) in Variant::ALL.iter().enumerate() {
            let values: Vec<(f64, f64, bool)> = reps.iter().map(|(r, _)| r[vi][h]).collect();
            rows.push(metrics(name, &v.label(), truths[h], &values));
        }
    }
    let clamped_draws = reps.iter().map(|(_, c)| c).sum();
    Ok(SimStudyResult {
        replications: config.replications,
        seed: config.seed,
        rows,
        clamped_draws,
        names: names.iter().map(|n| n.to_string()).collect(),
        per_rep: reps.into_iter().map(|(r, _)| r).collect(),
    })
}

pub fn write_study_csv(result: &SimStudyResult, path: &Path, comment: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["stratum", "variant", "bias_pct", "var", "mse", "coverage"])?;
    for r in &result.rows {
        w.write_record([
            r.stratum.clone(),
            r.variant.clone(),
            r.bias_pct.to_string(),
            r.var.to_string(),
            r.mse.to_string(),
            r.coverage.to_string(),
        ])?;
    }
    let body = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    crate::frame::write_commented(path, comment, &body)
}

/// Average of per-replication variance estimates, for diagnostics.
pub fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut s = CompensatedSum::new();
    let mut n = 0usize;
    for v in values {
        s.add(v);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s.value() / n as f64
    }
}
