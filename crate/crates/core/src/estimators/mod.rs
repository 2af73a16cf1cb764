//! Design-based estimation of the emission total.
//!
//! [`estimate`] runs the full pipeline on a [`SampleData`]: daily means per
//! component-day, allocation of well-site days, component means with their
//! day-sampling variance, variance pooling for components with a single
//! usable day, and stratum and population totals with the stage split.

pub mod component;
pub mod daily;
pub mod layout;
pub mod total;
pub mod wells;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use component::{
    component_generic, component_srs_hajek, component_srs_ipw, impute_component_variance, ComponentEstimate,
    ComponentFlags, Decomposition,
};
pub use daily::{
    hajek_daily, hajek_daily_mean, hajek_daily_var, ipw_daily, ipw_daily_mean, ipw_daily_modified, ipw_daily_var,
    DailyEstimate, Detection,
};
pub use total::{stratum_total, wald_ci, FacilityKey, StratumTotal, VarianceParts};
pub use layout::{total_inventory, ObservedPass, SampleLayout};
pub use wells::wells_allocate;

use crate::design::{DayDesign, Horizon};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Ipw,
    Hajek,
}

impl Estimator {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ipw" => Ok(Estimator::Ipw),
            "hajek" => Ok(Estimator::Hajek),
            _ => Err(Error::Config(format!("estimator must be `ipw` or `hajek`, got {s:?}"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Ipw => "ipw",
            Estimator::Hajek => "hajek",
        }
    }
}

/// Which stage II/III design the IPW estimator is evaluated under. The
/// ratio estimator always uses the modified design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignView {
    #[default]
    Original,
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub estimator: Estimator,
    pub horizon: Horizon,
    pub decomposition: Decomposition,
    pub design: DesignView,
    pub ci_level: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::Ipw,
            horizon: Horizon::Fixed(365),
            decomposition: Decomposition::Corrected,
            design: DesignView::Original,
            ci_level: 0.95,
        }
    }
}

impl EstimationConfig {
    pub fn new(estimator: Estimator, horizon: Horizon) -> Self {
        Self {
            estimator,
            horizon,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySample {
    pub day: u32,
    pub q_total: u32,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSample {
    /// Index into [`SampleData::labels`].
    pub label: usize,
    pub facility: u32,
    pub site: u32,
    /// Wells registered at the site, for well components.
    pub wells_at_site: Option<u32>,
    pub days: Vec<DaySample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSample {
    pub name: String,
    pub n_sampled: u32,
    pub n_population: u32,
    pub units: Vec<UnitSample>,
}

/// Observed data of one realized three-stage sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleData {
    pub strata: Vec<StratumSample>,
    pub labels: Arc<Vec<String>>,
}

/// One stage I unit after well allocation, with its estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    pub facility: FacilityKey,
    /// Labels of the sampled components the row was built from.
    pub sources: Vec<usize>,
    pub estimate: ComponentEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumEstimate {
    pub name: String,
    pub n_sampled: u32,
    pub n_population: u32,
    pub total: f64,
    pub var_3stage: f64,
    pub unclipped: VarianceParts,
    pub parts: VarianceParts,
    pub components: Vec<ComponentRow>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimationDiagnostics {
    pub phi_floor_hits: u64,
    pub zero_emitters: u32,
    /// Components with a single usable day whose variance was pooled.
    pub pooled: u32,
    /// Pooled components in strata without multi-day peers (variance 0).
    pub pooled_without_peers: Vec<String>,
}

/// Single-pass design-based estimate in kg/h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEstimate {
    pub config: EstimationConfig,
    pub strata: Vec<StratumEstimate>,
    pub total: f64,
    pub var_3stage: f64,
    pub unclipped: VarianceParts,
    pub parts: VarianceParts,
    pub diagnostics: EstimationDiagnostics,
}

pub fn estimate(sample: &SampleData, config: &EstimationConfig) -> Result<DesignEstimate> {
    if let Horizon::Fixed(0) = config.horizon {
        return Err(Error::Config("horizon must have at least one day".into()));
    }
    let mut diagnostics = EstimationDiagnostics::default();
    let mut strata = Vec::with_capacity(sample.strata.len());
    for s in &sample.strata {
        strata.push(estimate_stratum(s, config, &sample.labels, &mut diagnostics)?);
    }
    let total = crate::sum::csum(strata.iter().map(|s| s.total));
    let var_3stage = crate::sum::csum(strata.iter().map(|s| s.var_3stage));
    let unclipped = VarianceParts {
        stage1: crate::sum::csum(strata.iter().map(|s| s.unclipped.stage1)),
        stage2: crate::sum::csum(strata.iter().map(|s| s.unclipped.stage2)),
        stage3: crate::sum::csum(strata.iter().map(|s| s.unclipped.stage3)),
    };
    Ok(DesignEstimate {
        config: *config,
        strata,
        total,
        var_3stage,
        unclipped,
        parts: unclipped.clipped(var_3stage),
        diagnostics,
    })
}

/// A stage I unit ready for component estimation.
struct EstUnit {
    facility: FacilityKey,
    sources: Vec<usize>,
    /// One entry per surveyed day; days without detections carry zeros.
    days: Vec<DailyEstimate>,
    /// Starred (mean, var) per day for the modified IPW view.
    starred: Option<Vec<(f64, f64)>>,
    wells_allocated: bool,
}

enum Pending {
    Done(ComponentEstimate),
    Pool(ComponentEstimate),
}

fn daily_for(day: &DaySample, estimator: Estimator) -> Result<DailyEstimate> {
    let est = if day.detections.is_empty() {
        DailyEstimate {
            q_total: day.q_total,
            ..Default::default()
        }
    } else {
        match estimator {
            Estimator::Ipw => ipw_daily(&day.detections, day.q_total)?,
            Estimator::Hajek => hajek_daily(&day.detections, day.q_total)?,
        }
    };
    Ok(est.on_day(day.day))
}

/// Starred daily mean and variance implied by the any-detection
/// conditioning; days without detections drop out of the modified design.
fn starred_from_original(d: &DailyEstimate) -> (f64, f64) {
    let phi = d.phi_hat;
    (phi * d.mean_rate, phi * d.var + phi * (phi - 1.0) * d.mean_rate * d.mean_rate)
}

fn build_units(s: &StratumSample, config: &EstimationConfig) -> Result<Vec<EstUnit>> {
    let modified_ipw = config.estimator == Estimator::Ipw && config.design == DesignView::Modified;
    let mut out = Vec::new();
    let mut sites: BTreeMap<u32, (u32, Vec<usize>)> = BTreeMap::new();
    for (i, u) in s.units.iter().enumerate() {
        if u.days.is_empty() {
            return Err(Error::Estimation(format!("unit {} has no survey days", u.label)));
        }
        if let Some(w) = u.wells_at_site {
            let entry = sites.entry(u.site).or_insert((w, Vec::new()));
            if entry.0 != w {
                return Err(Error::Integrity(format!("site {} has conflicting well counts", u.site)));
            }
            entry.1.push(i);
            continue;
        }
        let days = u
            .days
            .iter()
            .map(|d| daily_for(d, config.estimator))
            .collect::<Result<Vec<_>>>()?;
        let starred = if modified_ipw {
            Some(
                u.days
                    .iter()
                    .zip(&days)
                    .map(|(d, e)| {
                        if d.detections.is_empty() {
                            Ok((0.0, 0.0))
                        } else {
                            ipw_daily_modified(&d.detections, d.q_total, e.phi_hat)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        out.push(EstUnit {
            facility: FacilityKey::Facility(u.facility),
            sources: vec![u.label],
            days,
            starred,
            wells_allocated: false,
        });
    }
    for (site, (wells, members)) in sites {
        let per_component = members
            .iter()
            .map(|&i| {
                s.units[i]
                    .days
                    .iter()
                    .map(|d| daily_for(d, config.estimator))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let days = wells_allocate(&per_component, wells)?;
        let starred = modified_ipw.then(|| days.iter().map(starred_from_original).collect::<Vec<_>>());
        let sources: Vec<usize> = members.iter().map(|&i| s.units[i].label).collect();
        for index in 0..wells {
            out.push(EstUnit {
                facility: FacilityKey::Well { site, index },
                sources: sources.clone(),
                days: days.clone(),
                starred: starred.clone(),
                wells_allocated: true,
            });
        }
    }
    Ok(out)
}

fn component_for(unit: &EstUnit, config: &EstimationConfig) -> Result<Option<Pending>> {
    let d_p = unit.days.len() as u32;
    let big_d = config.horizon.days(d_p);
    if d_p > big_d {
        return Err(Error::Estimation(format!(
            "{d_p} survey days exceed the horizon of {big_d} days"
        )));
    }
    let detection_days: Vec<usize> = (0..unit.days.len()).filter(|&t| unit.days[t].n_detected > 0).collect();
    if detection_days.is_empty() {
        return Ok(None);
    }
    let dd = big_d as f64;
    let pending = match config.estimator {
        Estimator::Ipw => match &unit.starred {
            None => {
                if d_p == 1 && big_d > 1 {
                    Pending::Pool(component::single_day_component(&unit.days[0], 1.0, big_d))
                } else {
                    Pending::Done(component_srs_ipw(&unit.days, d_p, big_d)?)
                }
            }
            Some(starred) => {
                let original = DayDesign::srs(d_p, big_d)?;
                let keep: Vec<usize> = detection_days.clone();
                let sub = DayDesign {
                    pi: keep.iter().map(|&t| original.pi[t]).collect(),
                    pi_joint: keep
                        .iter()
                        .map(|&t| keep.iter().map(|&u| original.pi_joint[t][u]).collect())
                        .collect(),
                };
                let stage3: Vec<crate::design::StageThreeDay> = keep
                    .iter()
                    .map(|&t| crate::design::StageThreeDay {
                        phis: Vec::new(),
                        phi_hat: unit.days[t].phi_hat,
                    })
                    .collect();
                let plan = crate::design::modified_plan(&sub, &stage3)?;
                let days: Vec<DailyEstimate> = keep
                    .iter()
                    .map(|&t| DailyEstimate {
                        mean_rate: starred[t].0,
                        var: starred[t].1,
                        ..unit.days[t]
                    })
                    .collect();
                if d_p == 1 && big_d > 1 {
                    Pending::Pool(component::single_day_component(&days[0], dd * plan.days.pi[0], big_d))
                } else {
                    // peers are chosen by surveyed days in both views
                    let mut c = component_generic(&days, &plan.days, dd)?;
                    c.usable_days = d_p;
                    Pending::Done(c)
                }
            }
        },
        Estimator::Hajek => {
            let days: Vec<DailyEstimate> = detection_days.iter().map(|&t| unit.days[t]).collect();
            if days.len() == 1 {
                let d_pi_star = days[0].phi_hat * d_p as f64;
                Pending::Pool(component::single_day_component(&days[0], d_pi_star, big_d))
            } else {
                Pending::Done(component_srs_hajek(&days, d_p, big_d)?)
            }
        }
    };
    Ok(Some(pending))
}

fn estimate_stratum(
    s: &StratumSample,
    config: &EstimationConfig,
    labels: &[String],
    diagnostics: &mut EstimationDiagnostics,
) -> Result<StratumEstimate> {
    let units = build_units(s, config)?;
    let mut pending = Vec::with_capacity(units.len());
    for (i, u) in units.iter().enumerate() {
        diagnostics.phi_floor_hits += u.days.iter().map(|d| d.floor_hits as u64).sum::<u64>();
        let horizon = config.horizon.days(u.days.len() as u32) as f64;
        let p = component_for(u, config)?;
        pending.push(match p {
            None => {
                diagnostics.zero_emitters += 1;
                Pending::Done(ComponentEstimate::zero(i, horizon))
            }
            Some(p) => p,
        });
    }
    let peers: Vec<ComponentEstimate> = pending
        .iter()
        .filter_map(|p| match p {
            Pending::Done(c) if !c.flags.zero_emitter && c.usable_days >= 2 => Some(c.clone()),
            _ => None,
        })
        .collect();
    let peer_refs: Vec<&ComponentEstimate> = peers.iter().collect();
    let mut rows = Vec::with_capacity(units.len());
    for (i, (u, p)) in units.iter().zip(pending).enumerate() {
        let mut est = match p {
            Pending::Done(c) => c,
            Pending::Pool(c) => {
                diagnostics.pooled += 1;
                let c = impute_component_variance(&c, &peer_refs);
                if c.flags.no_peers {
                    let names: Vec<&str> = u.sources.iter().map(|&l| labels[l].as_str()).collect();
                    diagnostics.pooled_without_peers.push(format!("{}: {}", s.name, names.join("+")));
                }
                c
            }
        };
        est.unit = i;
        est.flags.wells_allocated = u.wells_allocated;
        rows.push(ComponentRow {
            facility: u.facility,
            sources: u.sources.clone(),
            estimate: est,
        });
    }
    let keyed: Vec<(FacilityKey, &ComponentEstimate)> = rows.iter().map(|r| (r.facility, &r.estimate)).collect();
    let t = stratum_total(&keyed, s.n_sampled, s.n_population, config.decomposition)
        .map_err(|e| Error::Integrity(format!("stratum {:?}: {e}", s.name)))?;
    Ok(StratumEstimate {
        name: s.name.clone(),
        n_sampled: s.n_sampled,
        n_population: s.n_population,
        total: t.total,
        var_3stage: t.var_3stage,
        unclipped: t.unclipped,
        parts: t.parts,
        components: rows,
    })
}
