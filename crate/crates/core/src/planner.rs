//! Survey planning: true stage variances of the total estimator for a
//! candidate design, and the any-detection probability `gamma` that
//! governs whether a component gets a second survey day.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::frame::SurveyFrame;
use crate::oracle::{MicroComponent, MicroPopulation, StageVariances};
use crate::pod_model::{phi_any_detection, pod, PodParams};
use crate::sum::csum;

fn day_mean(day: &[crate::oracle::MicroPass]) -> f64 {
    csum(day.iter().map(|p| p.rate)) / day.len() as f64
}

/// `1 - prod(1 - phi)` over the passes of a day.
fn any_detection(day: &[crate::oracle::MicroPass]) -> f64 {
    1.0 - day.iter().map(|p| 1.0 - p.phi).product::<f64>()
}

/// Detection variance of a daily mean estimate with all passes known.
fn daily_variance(day: &[crate::oracle::MicroPass], estimator: Estimator) -> f64 {
    let q = day.len() as f64;
    match estimator {
        Estimator::Ipw => csum(day.iter().map(|p| (1.0 - p.phi) / p.phi * p.rate * p.rate)) / (q * q),
        Estimator::Hajek => {
            let mean = day_mean(day);
            let phi_dot = any_detection(day);
            let own = csum(day.iter().map(|p| phi_dot * (1.0 - p.phi) / p.phi * (p.rate - mean).powi(2)));
            let cross = csum(day.iter().map(|p| p.rate - mean));
            (own + (phi_dot - 1.0) * cross * cross) / (q * q)
        }
    }
}

/// Stage II and III variance of one component's mean estimate.
fn component_parts(c: &MicroComponent, d: u32, big_d: u32, estimator: Estimator) -> (f64, f64) {
    let dd = big_d as f64;
    let pi = d as f64 / dd;
    let pair = if big_d > 1 {
        d as f64 * (d as f64 - 1.0) / (dd * (dd - 1.0))
    } else {
        pi
    };
    let means: Vec<f64> = c.days.iter().map(|t| day_mean(t)).collect();
    let (pi_t, pi_tu): (Vec<f64>, Box<dyn Fn(usize, usize) -> f64>) = match estimator {
        Estimator::Ipw => (vec![pi; means.len()], Box::new(move |_, _| pair)),
        Estimator::Hajek => {
            let phi: Vec<f64> = c.days.iter().map(|t| any_detection(t)).collect();
            let marg = phi.iter().map(|f| f * pi).collect();
            (marg, Box::new(move |t, u| phi[t] * phi[u] * pair))
        }
    };
    let mut terms = Vec::with_capacity(means.len() * means.len());
    for t in 0..means.len() {
        for u in 0..means.len() {
            let joint = if t == u { pi_t[t] } else { pi_tu(t, u) };
            terms.push((joint - pi_t[t] * pi_t[u]) * means[t] / pi_t[t] * means[u] / pi_t[u]);
        }
    }
    let stage2 = csum(terms) / (dd * dd);
    let stage3 = csum(c.days.iter().zip(&pi_t).map(|(t, p)| daily_variance(t, estimator) / p)) / (dd * dd);
    (stage2, stage3)
}

/// Stage variances of the total estimator on a fully specified population,
/// from the closed-form true-variance expressions. Exact for IPW; a
/// linearization for the ratio estimator.
pub fn predict_micro(pop: &MicroPopulation, estimator: Estimator) -> Result<StageVariances> {
    pop.validate()?;
    let (mut s1, mut s2, mut s3) = (Vec::new(), Vec::new(), Vec::new());
    for s in &pop.strata {
        let big_n = s.facilities.len() as f64;
        let n = s.n_sampled as f64;
        let pi = n / big_n;
        let pair = if big_n > 1.0 {
            n * (n - 1.0) / (big_n * (big_n - 1.0))
        } else {
            pi
        };
        let facility_totals: Vec<f64> = s
            .facilities
            .iter()
            .map(|f| {
                csum(
                    f.components
                        .iter()
                        .map(|c| csum(c.days.iter().map(|t| day_mean(t))) / pop.days as f64),
                )
            })
            .collect();
        for (i, a) in facility_totals.iter().enumerate() {
            for (j, b) in facility_totals.iter().enumerate() {
                let joint = if i == j { pi } else { pair };
                s1.push((joint - pi * pi) * a * b / (pi * pi));
            }
        }
        for c in s.facilities.iter().flat_map(|f| &f.components) {
            let (v2, v3) = component_parts(c, pop.days_sampled, pop.days, estimator);
            s2.push(v2 / pi);
            s3.push(v3 / pi);
        }
    }
    Ok(StageVariances {
        stage1: csum(s1),
        stage2: csum(s2),
        stage3: csum(s3),
    })
}

/// Representative description of one stratum for planning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanStratum {
    pub name: String,
    pub n_population: u32,
    pub n_sampled: u32,
    pub components_per_facility: f64,
    /// Mean and between-facility SD of facility emission rates, kg/h.
    pub facility_mean: f64,
    pub facility_sd: f64,
    /// SD of a component's daily mean rate across days.
    pub day_sd: f64,
    /// SD of pass-level rates around the daily mean.
    pub pass_sd: f64,
    /// Detection probability of every pass.
    pub phi: f64,
    pub passes_per_day: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanScenario {
    pub days: u32,
    pub days_sampled: u32,
    pub strata: Vec<PlanStratum>,
}

impl PlanScenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Self = serde_json::from_str(&text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.days_sampled < 1 || self.days_sampled > self.days {
            return Err(Error::Config(format!(
                "need 1 <= days_sampled <= days, got {} and {}",
                self.days_sampled, self.days
            )));
        }
        for s in &self.strata {
            let bad = s.n_sampled < 1
                || s.n_sampled > s.n_population
                || s.passes_per_day < 1
                || !(s.phi > 0.0 && s.phi <= 1.0)
                || !(s.components_per_facility > 0.0)
                || [s.facility_mean, s.facility_sd, s.day_sd, s.pass_sd].iter().any(|v| !(*v >= 0.0));
            if bad {
                return Err(Error::Config(format!("plan stratum {:?} has invalid counts or values", s.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub stratum: String,
    pub stage1: f64,
    pub stage2: f64,
    pub stage3: f64,
}

/// Predicted stage variances (kg/h squared) per stratum and for the
/// population, treating components within a stratum as exchangeable.
pub fn predict_variance(scenario: &PlanScenario, estimator: Estimator) -> Result<Vec<PlanRow>> {
    scenario.validate()?;
    let d = scenario.days_sampled as f64;
    let dd = scenario.days as f64;
    let mut rows = Vec::new();
    for s in &scenario.strata {
        let big_n = s.n_population as f64;
        let n = s.n_sampled as f64;
        let components = big_n * s.components_per_facility;
        let weight = components * big_n / n;
        let comp_mean = s.facility_mean / s.components_per_facility;
        let q = s.passes_per_day as f64;
        let phi_dot = 1.0 - (1.0 - s.phi).powi(s.passes_per_day as i32);
        // SRS of d of D days over daily means with variance day_sd^2
        let mut day_part = (1.0 - d / dd) * s.day_sd * s.day_sd / d;
        let stage3 = match estimator {
            Estimator::Ipw => {
                let second_moment = comp_mean * comp_mean + s.day_sd * s.day_sd + s.pass_sd * s.pass_sd;
                (1.0 - s.phi) / s.phi * second_moment / q / d
            }
            Estimator::Hajek => {
                // conditioning on a detection adds (1 - phi_dot)/phi_dot of
                // the squared daily means to the day term
                let second_moment = comp_mean * comp_mean + s.day_sd * s.day_sd;
                day_part += (1.0 - phi_dot) / phi_dot * second_moment / d;
                phi_dot * (1.0 - s.phi) / s.phi * s.pass_sd * s.pass_sd / q / (phi_dot * d)
            }
        };
        rows.push(PlanRow {
            stratum: s.name.clone(),
            stage1: big_n * big_n * (1.0 - n / big_n) * s.facility_sd * s.facility_sd / n,
            stage2: weight * day_part,
            stage3: weight * stage3,
        });
    }
    rows.push(PlanRow {
        stratum: "population".into(),
        stage1: csum(rows.iter().map(|r| r.stage1)),
        stage2: csum(rows.iter().map(|r| r.stage2)),
        stage3: csum(rows.iter().map(|r| r.stage3)),
    });
    Ok(rows)
}

pub fn write_plan_csv(rows: &[PlanRow], path: &Path, comment: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    crate::frame::write_commented(path, comment, &body)
}

/// `1 - prod(1 - phi)` over the passes at a site on a component's first
/// survey day.
pub fn gamma_p(site_pass_phis: &[f64]) -> f64 {
    1.0 - site_pass_phis.iter().map(|p| 1.0 - p).product::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub component_id: String,
    pub facility_id: String,
    pub day: u32,
    pub gamma: f64,
}

/// Conservative `gamma` estimates with the facility standing in for the
/// site, for every component with at least one detection. Missed passes
/// take the mean probability of that facility-day's detections; a
/// facility-day without detections gives 0.
pub fn gamma_table(frame: &SurveyFrame, params: &PodParams) -> Result<Vec<GammaRow>> {
    // (facility, day) -> (detected phis, missed passes)
    let mut by_facility_day: BTreeMap<(&str, u32), (Vec<f64>, usize)> = BTreeMap::new();
    for (ci, c) in frame.components().iter().enumerate() {
        for block in frame.component_days(ci) {
            let entry = by_facility_day.entry((c.facility_id.as_str(), block.day)).or_default();
            for p in frame.day_passes(block) {
                match (p.detected, p.measured_rate, p.altitude, p.wind_speed) {
                    (true, Some(r), Some(a), Some(u)) => entry.0.push(pod(r, a, u, params)?),
                    _ => entry.1 += 1,
                }
            }
        }
    }
    let mut out = Vec::new();
    for (ci, c) in frame.components().iter().enumerate() {
        let days = frame.component_days(ci);
        let detected = days.iter().any(|b| frame.day_passes(b).iter().any(|p| p.detected));
        if !detected {
            continue;
        }
        let first = days[0].day;
        let (phis, missed) = &by_facility_day[&(c.facility_id.as_str(), first)];
        let gamma = if phis.is_empty() {
            0.0
        } else {
            phi_any_detection(phis, *missed)?
        };
        out.push(GammaRow {
            component_id: c.component_id.clone(),
            facility_id: c.facility_id.clone(),
            day: first,
            gamma,
        });
    }
    Ok(out)
}

/// Sample quantile by linear interpolation between order statistics
/// (type 7).
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}
