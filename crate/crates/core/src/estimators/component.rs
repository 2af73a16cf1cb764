//! Component-level estimators: averaging daily estimates over the survey
//! days and estimating the variance of that average.

use serde::{Deserialize, Serialize};

use super::daily::DailyEstimate;
use crate::design::DayDesign;
use crate::error::{Error, Result};
use crate::sum::csum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ComponentFlags {
    pub pooled_variance: bool,
    pub zero_emitter: bool,
    pub wells_allocated: bool,
    /// Pooling was needed but no peer had two usable days.
    pub no_peers: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEstimate {
    /// Position of the unit in its stratum sample.
    pub unit: usize,
    pub mean_rate: f64,
    pub var: f64,
    /// `sum_t V_t / pi_t^2` over the days used; the stage III part of the
    /// decomposition is this sum over `D^2`.
    pub stage3_sum: f64,
    /// Days in the stage II population for this component.
    pub horizon_days: f64,
    /// Days with a usable estimate (all days for IPW, detection days for
    /// the ratio estimator).
    pub usable_days: u32,
    pub flags: ComponentFlags,
}

impl ComponentEstimate {
    pub fn zero(unit: usize, horizon_days: f64) -> Self {
        Self {
            unit,
            mean_rate: 0.0,
            var: 0.0,
            stage3_sum: 0.0,
            horizon_days,
            usable_days: 0,
            flags: ComponentFlags {
                zero_emitter: true,
                ..Default::default()
            },
        }
    }

    /// Stage III contribution to this component's variance:
    /// `stage3_sum / D^2`, or `stage3_sum / D` for the literal display.
    pub fn var_stage3_part(&self, decomposition: Decomposition) -> f64 {
        match decomposition {
            Decomposition::Corrected => self.stage3_sum / (self.horizon_days * self.horizon_days),
            Decomposition::Printed => self.stage3_sum / self.horizon_days,
        }
    }
}

/// Scaling of the stage III decomposition term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decomposition {
    /// `1/D^2`, consistent with the component variance.
    #[default]
    Corrected,
    /// `1/D`, as displayed in the original decomposition formula.
    Printed,
}

/// IPW component estimate for an SRS of `d_p` of `big_d` days. `daily` holds
/// every surveyed day, zero-detection days as (0, 0).
pub fn component_srs_ipw(daily: &[DailyEstimate], d_p: u32, big_d: u32) -> Result<ComponentEstimate> {
    if daily.len() != d_p as usize {
        return Err(Error::Estimation(format!(
            "expected {d_p} daily estimates, got {}",
            daily.len()
        )));
    }
    if d_p > big_d {
        return Err(Error::Estimation(format!("d_p = {d_p} exceeds D = {big_d}")));
    }
    let census = d_p == big_d;
    if d_p < 2 && !census {
        return Err(Error::Estimation("closed-form day variance needs at least two days".into()));
    }
    let d = d_p as f64;
    let dd = big_d as f64;
    let ratio = dd / d;
    let mean = csum(daily.iter().map(|e| e.mean_rate)) / d;
    let third = csum(daily.iter().map(|e| ratio * e.var));
    let stage3_sum = csum(daily.iter().map(|e| ratio * ratio * e.var));
    let var = if census {
        third / (dd * dd)
    } else {
        let own = (dd - d) * dd / (d * (d - 1.0)) * csum(daily.iter().map(|e| e.mean_rate * e.mean_rate));
        let total = csum(daily.iter().map(|e| e.mean_rate));
        let cross = dd * (d - dd) / (d * d * (d - 1.0)) * total * total;
        (own + cross + third) / (dd * dd)
    };
    Ok(ComponentEstimate {
        unit: 0,
        mean_rate: mean,
        var,
        stage3_sum,
        horizon_days: dd,
        usable_days: d_p,
        flags: ComponentFlags::default(),
    })
}

/// Ratio-estimator component estimate under the modified design. `daily`
/// holds only days with detections; `d_p` counts all surveyed days.
pub fn component_srs_hajek(daily: &[DailyEstimate], d_p: u32, big_d: u32) -> Result<ComponentEstimate> {
    if daily.len() < 2 {
        return Err(Error::Estimation("closed-form variance needs two days with detections".into()));
    }
    if daily.len() > d_p as usize || d_p > big_d {
        return Err(Error::Estimation(format!(
            "inconsistent day counts: {} detection days, d_p = {d_p}, D = {big_d}",
            daily.len()
        )));
    }
    if daily.iter().any(|e| !(e.phi_hat > 0.0)) {
        return Err(Error::Estimation("detection day without a positive any-detection probability".into()));
    }
    let d = d_p as f64;
    let dd = big_d as f64;
    let scaled = |e: &DailyEstimate| e.mean_rate / e.phi_hat;
    let mean = csum(daily.iter().map(scaled)) / d;
    let third = csum(daily.iter().map(|e| dd / (d * e.phi_hat) * e.var));
    let stage3_sum = csum(daily.iter().map(|e| {
        let pi_star = e.phi_hat * d / dd;
        e.var / (pi_star * pi_star)
    }));
    let var = if d_p == big_d {
        // cross term vanishes; own term reduces to (1 - phi_hat)
        let own = csum(daily.iter().map(|e| (1.0 - e.phi_hat) * scaled(e) * scaled(e)));
        (own + third) / (dd * dd)
    } else {
        let own = csum(
            daily
                .iter()
                .map(|e| dd * (dd - 1.0 - e.phi_hat * (d - 1.0)) / (d * (d - 1.0)) * scaled(e) * scaled(e)),
        );
        let total = csum(daily.iter().map(scaled));
        let cross = dd * (d - dd) / (d * d * (d - 1.0)) * total * total;
        (own + cross + third) / (dd * dd)
    };
    Ok(ComponentEstimate {
        unit: 0,
        mean_rate: mean,
        var,
        stage3_sum,
        horizon_days: dd,
        usable_days: daily.len() as u32,
        flags: ComponentFlags::default(),
    })
}

/// Generic double-sum estimator for arbitrary day inclusion probabilities.
pub fn component_generic(daily: &[DailyEstimate], design: &DayDesign, big_d: f64) -> Result<ComponentEstimate> {
    design.check()?;
    if design.len() != daily.len() {
        return Err(Error::Estimation("day design and daily estimates differ in length".into()));
    }
    let n = daily.len();
    let mean = csum((0..n).map(|t| daily[t].mean_rate / design.pi[t])) / big_d;
    let mut terms = Vec::with_capacity(n * n + n);
    for t in 0..n {
        for u in 0..n {
            let (pt, pu, ptu) = (design.pi[t], design.pi[u], design.pi_joint[t][u]);
            terms.push((ptu - pt * pu) / ptu * (daily[t].mean_rate / pt) * (daily[u].mean_rate / pu));
        }
    }
    for t in 0..n {
        terms.push(daily[t].var / design.pi[t]);
    }
    let stage3_sum = csum((0..n).map(|t| daily[t].var / (design.pi[t] * design.pi[t])));
    Ok(ComponentEstimate {
        unit: 0,
        mean_rate: mean,
        var: csum(terms) / (big_d * big_d),
        stage3_sum,
        horizon_days: big_d,
        usable_days: n as u32,
        flags: ComponentFlags::default(),
    })
}

/// Replaces the variance of a single-usable-day component with the average
/// over same-stratum peers. With no peers the variance is 0 and
/// `flags.no_peers` is set.
pub fn impute_component_variance(target: &ComponentEstimate, peers: &[&ComponentEstimate]) -> ComponentEstimate {
    let mut out = target.clone();
    out.flags.pooled_variance = true;
    if peers.is_empty() {
        out.var = 0.0;
        out.flags.no_peers = true;
    } else {
        out.var = csum(peers.iter().map(|p| p.var)) / peers.len() as f64;
    }
    out
}

/// Mean and stage III sum of a component with a single usable day, before
/// its variance is pooled. `d_pi` is `D` times the (possibly starred)
/// inclusion probability of that day; passing it pre-multiplied keeps the
/// plain SRS case (`d_pi = 1`) free of rounding that would depend on `D`.
pub fn single_day_component(day: &DailyEstimate, d_pi: f64, big_d: u32) -> ComponentEstimate {
    let dd = big_d as f64;
    let weight = dd / d_pi;
    ComponentEstimate {
        unit: 0,
        mean_rate: day.mean_rate / d_pi,
        var: 0.0,
        stage3_sum: day.var * weight * weight,
        horizon_days: dd,
        usable_days: 1,
        flags: ComponentFlags::default(),
    }
}
