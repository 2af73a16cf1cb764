//! Stratum and population totals, three-stage variance and its split by
//! stage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::component::{ComponentEstimate, Decomposition};
use crate::design::{srs_pi, srs_pi_pair};
use crate::error::{Error, Result};
use crate::sum::{csum, CompensatedSum};

/// Variance contributions of stage I (facilities), stage II (days) and
/// stage III (detection).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VarianceParts {
    pub stage1: f64,
    pub stage2: f64,
    pub stage3: f64,
}

impl VarianceParts {
    pub fn sum(&self) -> f64 {
        self.stage1 + self.stage2 + self.stage3
    }

    /// Clips in order: stage III, then stage II against what stage III
    /// leaves, then stage I against the three-stage total.
    pub fn clipped(&self, var_3stage: f64) -> Self {
        let stage3 = self.stage3.max(0.0);
        let stage2 = (self.stage2 + self.stage3 - stage3).max(0.0);
        let stage1 = (var_3stage - stage2 - stage3).max(0.0);
        Self { stage1, stage2, stage3 }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            stage1: self.stage1 + other.stage1,
            stage2: self.stage2 + other.stage2,
            stage3: self.stage3 + other.stage3,
        }
    }
}

/// Stage I unit key: a facility, or one of the wells sharing a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FacilityKey {
    Facility(u32),
    Well { site: u32, index: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumTotal {
    pub total: f64,
    pub var_3stage: f64,
    pub unclipped: VarianceParts,
    pub parts: VarianceParts,
    pub facilities: u32,
}

/// Total and variance of one stratum from its component estimates.
pub fn stratum_total(
    components: &[(FacilityKey, &ComponentEstimate)],
    n_sampled: u32,
    n_population: u32,
    decomposition: Decomposition,
) -> Result<StratumTotal> {
    let pi = srs_pi(n_sampled, n_population);
    let mut by_facility: BTreeMap<FacilityKey, CompensatedSum> = BTreeMap::new();
    for (key, c) in components {
        by_facility.entry(*key).or_default().add(c.mean_rate / pi);
    }
    let facilities = by_facility.len() as u32;
    if facilities > n_sampled {
        return Err(Error::Integrity(format!(
            "{facilities} sampled facilities exceed the stratum sample size {n_sampled}"
        )));
    }
    let f: Vec<f64> = by_facility.values().map(|s| s.value()).collect();
    let total = csum(f.iter().copied());
    let squares = csum(f.iter().map(|x| x * x));
    let mut between = (1.0 - pi) * squares;
    if n_sampled >= 2 {
        let pair = srs_pi_pair(n_sampled, n_population);
        between += (1.0 - pi * pi / pair) * (total * total - squares);
    }
    let within = csum(components.iter().map(|(_, c)| c.var / pi));
    let var_3stage = between + within;

    let stage3 = csum(components.iter().map(|(_, c)| c.var_stage3_part(decomposition) / (pi * pi)));
    let stage2 = csum(
        components
            .iter()
            .map(|(_, c)| (c.var - c.var_stage3_part(decomposition)) / (pi * pi)),
    );
    let unclipped = VarianceParts {
        stage1: var_3stage - stage2 - stage3,
        stage2,
        stage3,
    };
    Ok(StratumTotal {
        total,
        var_3stage,
        unclipped,
        parts: unclipped.clipped(var_3stage),
        facilities,
    })
}

/// Wald interval `estimate +/- z sqrt(variance)`.
pub fn wald_ci(estimate: f64, variance: f64, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level must lie in (0,1), got {level}")));
    }
    if !(variance >= 0.0) {
        return Err(Error::Estimation(format!("negative variance {variance}")));
    }
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let half = z * variance.sqrt();
    Ok((estimate - half, estimate + half))
}
