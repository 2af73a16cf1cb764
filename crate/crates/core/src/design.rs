//! Inclusion probabilities for the three sampling stages.
//!
//! Stage I is a stratified SRS of facilities with every component of a
//! sampled facility included. Stage II is an SRS of survey days per
//! component. Stage III is Poisson sampling of passes with the detection
//! probability as inclusion probability. The modified plan conditions
//! stage II on at least one detection per day.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ComponentRef, StratumDef};

/// SRS marginal inclusion probability `n / N`.
pub fn srs_pi(n: u32, population: u32) -> f64 {
    n as f64 / population as f64
}

/// SRS joint inclusion probability of two distinct units,
/// `n (n - 1) / (N (N - 1))`; zero when `N = 1`.
pub fn srs_pi_pair(n: u32, population: u32) -> f64 {
    if population < 2 {
        return 0.0;
    }
    (n as f64 * (n as f64 - 1.0)) / (population as f64 * (population as f64 - 1.0))
}

#[derive(Debug, Clone, Default)]
pub struct StageOnePlan {
    sizes: HashMap<String, (u32, u32)>,
}

impl StageOnePlan {
    pub fn new(strata: &[StratumDef]) -> Self {
        Self {
            sizes: strata
                .iter()
                .map(|s| (s.name.clone(), (s.n_sampled, s.n_population)))
                .collect(),
        }
    }

    fn sizes(&self, stratum: &str) -> Result<(u32, u32)> {
        self.sizes
            .get(stratum)
            .copied()
            .ok_or_else(|| Error::Integrity(format!("unknown stratum {stratum:?}")))
    }
}

pub fn stage1_pi(p: &ComponentRef, plan: &StageOnePlan) -> Result<f64> {
    let (n, big_n) = plan.sizes(&p.stratum)?;
    Ok(srs_pi(n, big_n))
}

pub fn stage1_pi_joint(p: &ComponentRef, l: &ComponentRef, plan: &StageOnePlan) -> Result<f64> {
    let (np, big_np) = plan.sizes(&p.stratum)?;
    let (nl, big_nl) = plan.sizes(&l.stratum)?;
    if p.stratum != l.stratum {
        return Ok(srs_pi(np, big_np) * srs_pi(nl, big_nl));
    }
    if p.facility_id == l.facility_id {
        Ok(srs_pi(np, big_np))
    } else {
        Ok(srs_pi_pair(np, big_np))
    }
}

/// Population of days each component's survey days are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "days")]
pub enum Horizon {
    /// `D = d_p`: the surveyed days are the whole population.
    Observed,
    /// A fixed number of days, typically 365.
    Fixed(u32),
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon::Fixed(365)
    }
}

impl Horizon {
    pub fn days(&self, d_p: u32) -> u32 {
        match *self {
            Horizon::Observed => d_p,
            Horizon::Fixed(d) => d,
        }
    }

    /// `observed` or `year:<D>`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "observed" {
            return Ok(Horizon::Observed);
        }
        let days = s
            .strip_prefix("year:")
            .and_then(|d| d.parse::<u32>().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::Config(format!("stage2 must be `observed` or `year:<D>` with D > 0, got {s:?}")))?;
        Ok(Horizon::Fixed(days))
    }

    pub fn label(&self) -> String {
        match self {
            Horizon::Observed => "observed".into(),
            Horizon::Fixed(d) => format!("year:{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageTwoPlan {
    pub horizon: Horizon,
}

impl StageTwoPlan {
    pub fn new(horizon: Horizon) -> Self {
        Self { horizon }
    }

    /// `(pi, pi_joint for distinct days)` of an SRS of `d_p` days.
    pub fn probabilities(&self, d_p: u32) -> Result<(f64, f64)> {
        let big_d = self.horizon.days(d_p);
        if d_p == 0 || d_p > big_d {
            return Err(Error::Domain(format!("need 1 <= d_p <= D, got d_p = {d_p}, D = {big_d}")));
        }
        Ok((srs_pi(d_p, big_d), srs_pi_pair(d_p, big_d)))
    }
}

fn check_day(days: &[u32], t: u32) -> Result<()> {
    if days.contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("day {t} was not sampled for this component")))
    }
}

/// Stage II inclusion probability of day `t` given the component's sampled
/// days.
pub fn stage2_pi(days: &[u32], t: u32, plan: &StageTwoPlan) -> Result<f64> {
    check_day(days, t)?;
    Ok(plan.probabilities(days.len() as u32)?.0)
}

pub fn stage2_pi_joint(days: &[u32], t: u32, u: u32, plan: &StageTwoPlan) -> Result<f64> {
    check_day(days, t)?;
    check_day(days, u)?;
    let (pi, pair) = plan.probabilities(days.len() as u32)?;
    Ok(if t == u { pi } else { pair })
}

/// Day inclusion probabilities of one component as a marginal vector and a
/// full joint matrix (diagonal equal to the marginals).
#[derive(Debug, Clone, PartialEq)]
pub struct DayDesign {
    pub pi: Vec<f64>,
    pub pi_joint: Vec<Vec<f64>>,
}

impl DayDesign {
    pub fn srs(d_p: u32, big_d: u32) -> Result<Self> {
        let plan = StageTwoPlan::new(Horizon::Fixed(big_d));
        let (pi, pair) = plan.probabilities(d_p)?;
        let d = d_p as usize;
        let pi_joint = (0..d)
            .map(|t| (0..d).map(|u| if t == u { pi } else { pair }).collect())
            .collect();
        Ok(Self { pi: vec![pi; d], pi_joint })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// Checks shape, symmetry, diagonal and range.
    pub fn check(&self) -> Result<()> {
        let n = self.pi.len();
        if self.pi_joint.len() != n || self.pi_joint.iter().any(|r| r.len() != n) {
            return Err(Error::Estimation("day joint-probability table is incomplete".into()));
        }
        for t in 0..n {
            if !(self.pi[t] > 0.0 && self.pi[t] <= 1.0) {
                return Err(Error::Estimation(format!("day inclusion probability out of (0,1]: {}", self.pi[t])));
            }
            if self.pi_joint[t][t] != self.pi[t] {
                return Err(Error::Estimation("joint-probability diagonal differs from marginals".into()));
            }
            for u in 0..t {
                if self.pi_joint[t][u] != self.pi_joint[u][t] {
                    return Err(Error::Estimation("day joint-probability table is asymmetric".into()));
                }
                if !(self.pi_joint[t][u] > 0.0) {
                    return Err(Error::Estimation(
                        "variance estimation needs positive joint probabilities".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Detection probabilities of the passes on one component-day.
#[derive(Debug, Clone, PartialEq)]
pub struct StageThreeDay {
    /// Probability of each detected pass.
    pub phis: Vec<f64>,
    /// Estimated probability of at least one detection that day.
    pub phi_hat: f64,
}

/// Starred probabilities for one component under the modified design,
/// restricted to days with at least one detection.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedPlan {
    pub days: DayDesign,
    /// Per day, starred inclusion probability of each detected pass.
    pub pass_pi: Vec<Vec<f64>>,
    /// Per day, starred joint inclusion probabilities of detected passes.
    pub pass_pi_joint: Vec<Vec<Vec<f64>>>,
}

/// Builds the starred design from the original day design and the stage III
/// probabilities of the same days.
pub fn modified_plan(original: &DayDesign, stage3: &[StageThreeDay]) -> Result<ModifiedPlan> {
    let n = original.len();
    if stage3.len() != n {
        return Err(Error::Estimation("modified plan needs stage III data for every day".into()));
    }
    for s in stage3 {
        if !(s.phi_hat > 0.0 && s.phi_hat <= 1.0) {
            return Err(Error::Estimation(format!(
                "missing or invalid any-detection probability {}",
                s.phi_hat
            )));
        }
    }
    let pi: Vec<f64> = (0..n).map(|t| stage3[t].phi_hat * original.pi[t]).collect();
    let pi_joint = (0..n)
        .map(|t| {
            (0..n)
                .map(|u| {
                    if t == u {
                        pi[t]
                    } else {
                        stage3[t].phi_hat * stage3[u].phi_hat * original.pi_joint[t][u]
                    }
                })
                .collect()
        })
        .collect();
    let pass_pi = stage3
        .iter()
        .map(|s| s.phis.iter().map(|&phi| phi / s.phi_hat).collect())
        .collect();
    let pass_pi_joint = stage3
        .iter()
        .map(|s| {
            let k = s.phis.len();
            (0..k)
                .map(|q| {
                    (0..k)
                        .map(|r| {
                            if q == r {
                                s.phis[q] / s.phi_hat
                            } else {
                                s.phis[q] * s.phis[r] / s.phi_hat
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(ModifiedPlan {
        days: DayDesign { pi, pi_joint },
        pass_pi,
        pass_pi_joint,
    })
}
