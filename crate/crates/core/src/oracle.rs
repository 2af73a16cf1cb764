//! Exhaustive enumeration of every sampling outcome on tiny populations.
//!
//! A [`MicroPopulation`] fixes every pass rate and detection probability.
//! [`enumerate`] visits each combination of facility sample, day sample
//! and detection pattern with its exact probability, runs the estimator on
//! it, and returns exact moments of the estimates together with the
//! law-of-total-variance split of `Var(T)` by stage.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Horizon;
use crate::error::{Error, Result};
use crate::estimators::{
    estimate, DaySample, Detection, EstimationConfig, SampleData, StratumSample,
    UnitSample, VarianceParts,
};
use crate::sum::{csum, CompensatedSum};

/// Largest number of outcomes [`enumerate`] will visit.
pub const OUTCOME_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroPass {
    pub rate: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroComponent {
    pub id: String,
    /// Passes for each of the population days.
    pub days: Vec<Vec<MicroPass>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroFacility {
    pub id: String,
    pub components: Vec<MicroComponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroStratum {
    pub name: String,
    pub n_sampled: u32,
    pub facilities: Vec<MicroFacility>,
}

/// Fully specified population with SRS of facilities within strata and SRS
/// of `days_sampled` of `days` days for every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroPopulation {
    pub days: u32,
    pub days_sampled: u32,
    pub strata: Vec<MicroStratum>,
}

fn choose(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

impl MicroPopulation {
    pub fn from_json(text: &str) -> Result<Self> {
        let pop: Self = serde_json::from_str(text)?;
        pop.validate()?;
        Ok(pop)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.days_sampled < 1 || self.days_sampled > self.days {
            return Err(Error::Config(format!(
                "need 1 <= days_sampled <= days, got {} and {}",
                self.days_sampled, self.days
            )));
        }
        for s in &self.strata {
            let big_n = s.facilities.len() as u32;
            if s.n_sampled < 1 || s.n_sampled > big_n {
                return Err(Error::Config(format!(
                    "stratum {:?}: need 1 <= n_sampled <= {big_n} facilities",
                    s.name
                )));
            }
            for c in s.facilities.iter().flat_map(|f| &f.components) {
                if c.days.len() != self.days as usize {
                    return Err(Error::Config(format!("component {:?} must list {} days", c.id, self.days)));
                }
                for p in c.days.iter().flatten() {
                    if !(p.phi > 0.0 && p.phi <= 1.0) || !(p.rate >= 0.0 && p.rate.is_finite()) {
                        return Err(Error::Config(format!(
                            "component {:?}: pass needs rate >= 0 and phi in (0, 1]",
                            c.id
                        )));
                    }
                }
                if c.days.iter().any(|d| d.is_empty()) {
                    return Err(Error::Config(format!("component {:?} has a day without passes", c.id)));
                }
            }
        }
        Ok(())
    }

    /// Number of (facility sample, day samples, detection pattern)
    /// outcomes, counting patterns of probability zero.
    pub fn outcome_count(&self) -> u128 {
        let (big_d, d) = (self.days as usize, self.days_sampled as usize);
        let day_subsets = subsets(big_d, d);
        let per_component = |c: &MicroComponent| -> u128 {
            day_subsets
                .iter()
                .map(|s| s.iter().fold(1u128, |a, &t| a.saturating_mul(1u128 << c.days[t].len().min(100))))
                .fold(0u128, |a, b| a.saturating_add(b))
        };
        self.strata.iter().fold(1u128, |acc, s| {
            let weights: Vec<u128> = s
                .facilities
                .iter()
                .map(|f| f.components.iter().map(per_component).fold(1u128, |a, b| a.saturating_mul(b)))
                .collect();
            let stratum: u128 = subsets(weights.len(), s.n_sampled as usize)
                .iter()
                .map(|set| set.iter().fold(1u128, |a, &i| a.saturating_mul(weights[i])))
                .fold(0u128, |a, b| a.saturating_add(b));
            acc.saturating_mul(stratum)
        })
    }
}

/// Population total of the daily mean rates averaged over the horizon.
pub fn true_total(pop: &MicroPopulation) -> f64 {
    let big_d = pop.days as f64;
    csum(pop.strata.iter().flat_map(|s| &s.facilities).flat_map(|f| &f.components).map(|c| {
        csum(c.days.iter().map(|day| csum(day.iter().map(|p| p.rate)) / day.len() as f64)) / big_d
    }))
}

/// Stage-wise variance of the estimated total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageVariances {
    pub stage1: f64,
    pub stage2: f64,
    pub stage3: f64,
}

impl StageVariances {
    pub fn sum(&self) -> f64 {
        self.stage1 + self.stage2 + self.stage3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub outcomes: u64,
    /// Sum of outcome probabilities (1 up to rounding).
    pub probability_sum: f64,
    /// Largest absolute difference between an outcome's probability under
    /// the original and under the modified design.
    pub max_design_gap: f64,
    pub true_total: f64,
    pub mean_total: f64,
    /// `Var(T)` computed directly over outcomes.
    pub var_total: f64,
    /// Law-of-total-variance split of `Var(T)`.
    pub exact: StageVariances,
    pub mean_var_3stage: f64,
    pub mean_unclipped: VarianceParts,
    pub mean_parts: VarianceParts,
    /// (total, probability) for every outcome, in enumeration order.
    pub totals: Vec<(f64, f64)>,
}

impl EnumerationResult {
    /// Distinct totals (merged within `tol`) with their probabilities.
    pub fn distribution(&self, tol: f64) -> Vec<(f64, f64)> {
        let mut sorted = self.totals.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (t, p) in sorted {
            match out.last_mut() {
                Some(last) if (t - last.0).abs() <= tol => last.1 += p,
                _ => out.push((t, p)),
            }
        }
        out
    }
}

struct FlatComponent {
    stratum: usize,
    facility: u32,
    label: usize,
}

/// Detection pattern of a component over its sampled days.
struct PatternOutcome {
    p_original: f64,
    p_modified: f64,
    days: Vec<DaySample>,
}

struct DaySubset {
    prob: f64,
    patterns: Vec<PatternOutcome>,
}

fn day_patterns(day: u32, passes: &[MicroPass]) -> Vec<(f64, f64, DaySample)> {
    let q = passes.len();
    let phi_dot = 1.0 - passes.iter().map(|p| 1.0 - p.phi).product::<f64>();
    (0..1usize << q)
        .filter_map(|mask| {
            let mut p = 1.0;
            let mut detections = Vec::new();
            for (i, pass) in passes.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    p *= pass.phi;
                    detections.push(Detection::new(pass.rate, pass.phi));
                } else {
                    p *= 1.0 - pass.phi;
                }
            }
            // modified route: any-detection indicator, then the
            // conditional pattern given at least one detection
            let p_mod = if detections.is_empty() {
                1.0 - phi_dot
            } else {
                phi_dot * (p / phi_dot)
            };
            (p > 0.0 || p_mod > 0.0).then_some((
                p,
                p_mod,
                DaySample {
                    day,
                    q_total: q as u32,
                    detections,
                },
            ))
        })
        .collect()
}

fn component_outcomes(c: &MicroComponent, day_sets: &[Vec<usize>], p_days: f64) -> Vec<DaySubset> {
    day_sets
        .iter()
        .map(|set| {
            let per_day: Vec<Vec<(f64, f64, DaySample)>> =
                set.iter().map(|&t| day_patterns(t as u32, &c.days[t])).collect();
            let mut patterns = Vec::new();
            let mut idx = vec![0usize; per_day.len()];
            loop {
                let (mut po, mut pm) = (1.0, 1.0);
                let mut days = Vec::with_capacity(idx.len());
                for (k, &i) in idx.iter().enumerate() {
                    po *= per_day[k][i].0;
                    pm *= per_day[k][i].1;
                    days.push(per_day[k][i].2.clone());
                }
                patterns.push(PatternOutcome {
                    p_original: po,
                    p_modified: pm,
                    days,
                });
                if !advance(&mut idx, |k| per_day[k].len()) {
                    break;
                }
            }
            DaySubset { prob: p_days, patterns }
        })
        .collect()
}

/// Mixed-radix increment; false once every combination was visited.
fn advance(idx: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < radix(k) {
            return true;
        }
        idx[k] = 0;
    }
    false
}

#[derive(Default)]
struct Moments {
    prob: CompensatedSum,
    total: CompensatedSum,
    var3: CompensatedSum,
    unclipped: [CompensatedSum; 3],
    parts: [CompensatedSum; 3],
    gap: f64,
}

impl Moments {
    fn merge(&mut self, o: &Moments) {
        self.prob.add(o.prob.value());
        self.total.add(o.total.value());
        self.var3.add(o.var3.value());
        for i in 0..3 {
            self.unclipped[i].add(o.unclipped[i].value());
            self.parts[i].add(o.parts[i].value());
        }
        self.gap = self.gap.max(o.gap);
    }
}

struct StageOneOutcome {
    prob: f64,
    mean: f64,
    stage2: f64,
    stage3: f64,
    moments: Moments,
    totals: Vec<(f64, f64)>,
}

/// Weighted mean and variance of `(weight, value)` pairs whose weights sum
/// to `mass`.
fn weighted_mean_var(items: &[(f64, f64)], mass: f64) -> (f64, f64) {
    let mean = csum(items.iter().map(|(w, v)| w * v)) / mass;
    let var = csum(items.iter().map(|(w, v)| w * (v - mean) * (v - mean))) / mass;
    (mean, var)
}

fn sample_for(
    pop: &MicroPopulation,
    flat: &[FlatComponent],
    chosen: &[usize],
    days: &[&[DaySample]],
    labels: &Arc<Vec<String>>,
) -> SampleData {
    let mut strata: Vec<StratumSample> = pop
        .strata
        .iter()
        .map(|s| StratumSample {
            name: s.name.clone(),
            n_sampled: s.n_sampled,
            n_population: s.facilities.len() as u32,
            units: Vec::new(),
        })
        .collect();
    for (&ci, d) in chosen.iter().zip(days) {
        let c = &flat[ci];
        strata[c.stratum].units.push(UnitSample {
            label: c.label,
            facility: c.facility,
            site: c.facility,
            wells_at_site: None,
            days: d.to_vec(),
        });
    }
    SampleData {
        strata,
        labels: Arc::clone(labels),
    }
}

/// Enumerates every outcome and applies the estimator configured by
/// `config`; the stage II horizon is always the population's `days`.
pub fn enumerate(pop: &MicroPopulation, config: &EstimationConfig) -> Result<EnumerationResult> {
    pop.validate()?;
    let outcomes = pop.outcome_count();
    if outcomes > OUTCOME_LIMIT {
        return Err(Error::EnumerationTooLarge {
            outcomes,
            limit: OUTCOME_LIMIT,
        });
    }
    let config = EstimationConfig {
        horizon: Horizon::Fixed(pop.days),
        ..*config
    };

    let day_sets = subsets(pop.days as usize, pop.days_sampled as usize);
    let p_days = 1.0 / choose(pop.days, pop.days_sampled);
    let mut flat = Vec::new();
    let mut comp_outcomes = Vec::new();
    let mut labels = Vec::new();
    // components of each facility, per stratum
    let mut facility_members: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut facility_id = 0u32;
    for (h, s) in pop.strata.iter().enumerate() {
        let mut members = Vec::new();
        for f in &s.facilities {
            let mut m = Vec::new();
            for c in &f.components {
                m.push(flat.len());
                flat.push(FlatComponent {
                    stratum: h,
                    facility: facility_id,
                    label: labels.len(),
                });
                labels.push(format!("{}/{}", f.id, c.id));
                comp_outcomes.push(component_outcomes(c, &day_sets, p_days));
            }
            members.push(m);
            facility_id += 1;
        }
        facility_members.push(members);
    }
    let labels = Arc::new(labels);

    // stage I outcomes: one facility subset per stratum
    let per_stratum: Vec<Vec<Vec<usize>>> = pop
        .strata
        .iter()
        .map(|s| subsets(s.facilities.len(), s.n_sampled as usize))
        .collect();
    let p_stage1: f64 = pop
        .strata
        .iter()
        .map(|s| 1.0 / choose(s.facilities.len() as u32, s.n_sampled))
        .product();
    let mut stage1 = Vec::new();
    let mut idx = vec![0usize; per_stratum.len()];
    loop {
        let mut chosen = Vec::new();
        for (h, &i) in idx.iter().enumerate() {
            for &f in &per_stratum[h][i] {
                chosen.extend_from_slice(&facility_members[h][f]);
            }
        }
        stage1.push(chosen);
        if !advance(&mut idx, |h| per_stratum[h].len()) {
            break;
        }
    }

    let results: Vec<StageOneOutcome> = stage1
        .par_iter()
        .map(|chosen| -> Result<StageOneOutcome> {
            let mut moments = Moments::default();
            let mut totals = Vec::new();
            let mut stage2_items = Vec::new();
            let mut stage3_within = Vec::new();
            let mut d_idx = vec![0usize; chosen.len()];
            loop {
                let subsets: Vec<&DaySubset> =
                    chosen.iter().zip(&d_idx).map(|(&c, &i)| &comp_outcomes[c][i]).collect();
                let p2: f64 = subsets.iter().map(|s| s.prob).product();
                let mut items = Vec::new();
                let mut q_idx = vec![0usize; chosen.len()];
                loop {
                    let pats: Vec<&PatternOutcome> =
                        subsets.iter().zip(&q_idx).map(|(s, &i)| &s.patterns[i]).collect();
                    let p3: f64 = pats.iter().map(|p| p.p_original).product();
                    let p3_mod: f64 = pats.iter().map(|p| p.p_modified).product();
                    let days: Vec<&[DaySample]> = pats.iter().map(|p| p.days.as_slice()).collect();
                    let sample = sample_for(pop, &flat, chosen, &days, &labels);
                    let est = estimate(&sample, &config)?;
                    let w = p_stage1 * p2 * p3;
                    moments.prob.add(w);
                    moments.total.add(w * est.total);
                    moments.var3.add(w * est.var_3stage);
                    for (i, (u, c)) in [
                        (est.unclipped.stage1, est.parts.stage1),
                        (est.unclipped.stage2, est.parts.stage2),
                        (est.unclipped.stage3, est.parts.stage3),
                    ]
                    .into_iter()
                    .enumerate()
                    {
                        moments.unclipped[i].add(w * u);
                        moments.parts[i].add(w * c);
                    }
                    moments.gap = moments.gap.max((w - p_stage1 * p2 * p3_mod).abs());
                    totals.push((est.total, w));
                    items.push((p3, est.total));
                    if !advance(&mut q_idx, |k| subsets[k].patterns.len()) {
                        break;
                    }
                }
                let mass = csum(items.iter().map(|(p, _)| *p));
                let (m3, v3) = weighted_mean_var(&items, mass);
                stage2_items.push((p2, m3));
                stage3_within.push(p2 * v3);
                if !advance(&mut d_idx, |k| comp_outcomes[chosen[k]].len()) {
                    break;
                }
            }
            let mass = csum(stage2_items.iter().map(|(p, _)| *p));
            let (m2, v2) = weighted_mean_var(&stage2_items, mass);
            Ok(StageOneOutcome {
                prob: p_stage1,
                mean: m2,
                stage2: v2,
                stage3: csum(stage3_within) / mass,
                moments,
                totals,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut moments = Moments::default();
    let mut totals = Vec::with_capacity(outcomes as usize);
    for r in &results {
        moments.merge(&r.moments);
        totals.extend_from_slice(&r.totals);
    }
    let mass = csum(results.iter().map(|r| r.prob));
    let top: Vec<(f64, f64)> = results.iter().map(|r| (r.prob, r.mean)).collect();
    let (mean1, stage1) = weighted_mean_var(&top, mass);
    let exact = StageVariances {
        stage1,
        stage2: csum(results.iter().map(|r| r.prob * r.stage2)) / mass,
        stage3: csum(results.iter().map(|r| r.prob * r.stage3)) / mass,
    };
    let prob = moments.prob.value();
    let mean_total = moments.total.value() / prob;
    let var_total = csum(totals.iter().map(|(t, p)| p * (t - mean_total) * (t - mean_total))) / prob;
    debug_assert!((mean1 - mean_total).abs() <= 1e-9 * mean_total.abs().max(1.0));
    let parts = |a: &[CompensatedSum; 3]| VarianceParts {
        stage1: a[0].value() / prob,
        stage2: a[1].value() / prob,
        stage3: a[2].value() / prob,
    };
    Ok(EnumerationResult {
        outcomes: totals.len() as u64,
        probability_sum: prob,
        max_design_gap: moments.gap,
        true_total: true_total(pop),
        mean_total,
        var_total,
        exact,
        mean_var_3stage: moments.var3.value() / prob,
        mean_unclipped: parts(&moments.unclipped),
        mean_parts: parts(&moments.parts),
        totals,
    })
}

/// Exact stage I, II and III variances of the estimator.
pub fn exact_stage_variances(pop: &MicroPopulation, config: &EstimationConfig) -> Result<StageVariances> {
    Ok(enumerate(pop, config)?.exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Estimator;

    fn micro_a() -> MicroPopulation {
        MicroPopulation::from_json(
            r#"{"days": 2, "days_sampled": 1, "strata": [{"name": "h", "n_sampled": 1,
                "facilities": [{"id": "f", "components": [{"id": "c",
                "days": [[{"rate": 4.0, "phi": 1.0}], [{"rate": 6.0, "phi": 1.0}]]}]}]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(subsets(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(subsets(2, 2), vec![vec![0, 1]]);
        assert_eq!(choose(4, 2), 6.0);
        assert!((choose(254, 45) / choose(254, 209) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn micro_a_by_hand() {
        let pop = micro_a();
        assert_eq!(true_total(&pop), 5.0);
        assert_eq!(pop.outcome_count(), 4);
        let r = enumerate(&pop, &EstimationConfig::new(Estimator::Ipw, Horizon::Fixed(2))).unwrap();
        assert_eq!(r.outcomes, 2);
        assert_eq!(r.distribution(1e-12), vec![(4.0, 0.5), (6.0, 0.5)]);
        assert_eq!(r.mean_total, 5.0);
        assert_eq!(r.var_total, 1.0);
        assert_eq!(r.exact.stage2, 1.0);
    }

    #[test]
    fn size_limit() {
        let mut pop = micro_a();
        let pass = MicroPass { rate: 1.0, phi: 0.5 };
        pop.strata[0].facilities[0].components[0].days = vec![vec![pass; 40]; 2];
        assert!(matches!(
            enumerate(&pop, &EstimationConfig::default()),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }
}
