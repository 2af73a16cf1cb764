//! Mapping a survey frame onto the estimator's sample structure.
//!
//! The layout is built once per frame. Each call to
//! [`SampleLayout::sample`] supplies the emission rate of every detected
//! pass (measured, bias-corrected or drawn) and recomputes detection
//! probabilities from the POD curve.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{estimate, DaySample, DesignEstimate, Detection, EstimationConfig, SampleData, StratumSample, UnitSample};
use crate::error::{Error, Result};
use crate::frame::SurveyFrame;
use crate::pod_model::{pod, PodParams};

/// Conditions of a detected pass, in canonical pass order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedPass {
    pub measured_rate: f64,
    pub wind_speed: f64,
    pub altitude: f64,
}

#[derive(Debug, Clone)]
struct DayLayout {
    day: u32,
    q_total: u32,
    /// Range into `SampleLayout::observed`.
    start: usize,
    end: usize,
}

#[derive(Debug, Clone)]
struct UnitLayout {
    label: usize,
    facility: u32,
    site: u32,
    wells_at_site: Option<u32>,
    days: Vec<DayLayout>,
}

#[derive(Debug, Clone)]
struct StratumLayout {
    name: String,
    n_sampled: u32,
    n_population: u32,
    units: Vec<UnitLayout>,
}

#[derive(Debug, Clone)]
pub struct SampleLayout {
    strata: Vec<StratumLayout>,
    observed: Vec<ObservedPass>,
    labels: Arc<Vec<String>>,
}

impl SampleLayout {
    pub fn from_frame(frame: &SurveyFrame) -> Self {
        let mut facility_ids: BTreeMap<&str, u32> = BTreeMap::new();
        let mut site_ids: BTreeMap<&str, u32> = BTreeMap::new();
        for c in frame.components() {
            let next = facility_ids.len() as u32;
            facility_ids.entry(&c.facility_id).or_insert(next);
            let next = site_ids.len() as u32;
            site_ids.entry(&c.site_id).or_insert(next);
        }

        let mut strata: Vec<StratumLayout> = frame
            .strata()
            .iter()
            .map(|s| StratumLayout {
                name: s.name.clone(),
                n_sampled: s.n_sampled,
                n_population: s.n_population,
                units: Vec::new(),
            })
            .collect();
        let mut observed = Vec::new();
        for (ci, c) in frame.components().iter().enumerate() {
            let mut days = Vec::new();
            for block in frame.component_days(ci) {
                let start = observed.len();
                for p in frame.day_passes(block).iter().filter(|p| p.detected) {
                    observed.push(ObservedPass {
                        measured_rate: p.measured_rate.unwrap_or(0.0),
                        wind_speed: p.wind_speed.unwrap_or(0.0),
                        altitude: p.altitude.unwrap_or(0.0),
                    });
                }
                days.push(DayLayout {
                    day: block.day,
                    q_total: block.q_total(),
                    start,
                    end: observed.len(),
                });
            }
            let h = frame.stratum_position(&c.stratum).expect("validated stratum");
            strata[h].units.push(UnitLayout {
                label: ci,
                facility: facility_ids[c.facility_id.as_str()],
                site: site_ids[c.site_id.as_str()],
                wells_at_site: c.is_well.then_some(c.wells_at_site),
                days,
            });
        }
        let labels = frame.components().iter().map(|c| c.component_id.clone()).collect();
        Self {
            strata,
            observed,
            labels: Arc::new(labels),
        }
    }

    /// Detected passes in canonical order.
    pub fn observed(&self) -> &[ObservedPass] {
        &self.observed
    }

    pub fn labels(&self) -> &Arc<Vec<String>> {
        &self.labels
    }

    /// Sample data with detection `k` at rate `rates[k]`, its probability
    /// taken from the POD curve at that rate.
    pub fn sample(&self, rates: &[f64], params: &PodParams) -> Result<SampleData> {
        if rates.len() != self.observed.len() {
            return Err(Error::Estimation(format!(
                "{} rates supplied for {} detected passes",
                rates.len(),
                self.observed.len()
            )));
        }
        let detections = self
            .observed
            .iter()
            .zip(rates)
            .map(|(o, &rate)| Ok(Detection::new(rate, pod(rate, o.altitude, o.wind_speed, params)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.with_detections(&detections))
    }

    /// Sample data at the measured rates, each scaled by `factor`.
    pub fn measured_sample(&self, params: &PodParams, factor: f64) -> Result<SampleData> {
        let rates: Vec<f64> = self.observed.iter().map(|o| o.measured_rate * factor).collect();
        self.sample(&rates, params)
    }

    fn with_detections(&self, detections: &[Detection]) -> SampleData {
        let strata = self
            .strata
            .iter()
            .map(|s| StratumSample {
                name: s.name.clone(),
                n_sampled: s.n_sampled,
                n_population: s.n_population,
                units: s
                    .units
                    .iter()
                    .map(|u| UnitSample {
                        label: u.label,
                        facility: u.facility,
                        site: u.site,
                        wells_at_site: u.wells_at_site,
                        days: u
                            .days
                            .iter()
                            .map(|d| DaySample {
                                day: d.day,
                                q_total: d.q_total,
                                detections: detections[d.start..d.end].to_vec(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        SampleData {
            strata,
            labels: Arc::clone(&self.labels),
        }
    }
}

/// One design-based pass over the frame with measured rates scaled by
/// `rate_factor` (1 for raw, the bias factor for bias-corrected).
pub fn total_inventory(
    frame: &SurveyFrame,
    params: &PodParams,
    rate_factor: f64,
    config: &EstimationConfig,
) -> Result<DesignEstimate> {
    let layout = SampleLayout::from_frame(frame);
    estimate(&layout.measured_sample(params, rate_factor)?, config)
}
