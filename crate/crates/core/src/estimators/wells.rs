//! Splitting shared well-site emissions equally among the wells of a site.

use std::collections::BTreeMap;

use super::daily::DailyEstimate;
use crate::error::{Error, Result};
use crate::sum::csum;

/// Allocates per-day estimates of the well components at one site to each of
/// `wells_at_site` wells.
///
/// `site_wells` holds, per well component, its daily estimates (day ids
/// must be set). The result has one entry per day surveyed by any of the
/// components: mean `sum Y / W`, variance `sum V / W^2`, and any-detection
/// probability `1 - prod(1 - phi_hat)` over components detected that day.
pub fn wells_allocate(site_wells: &[Vec<DailyEstimate>], wells_at_site: u32) -> Result<Vec<DailyEstimate>> {
    let any_detection = site_wells.iter().flatten().any(|d| d.n_detected > 0);
    if wells_at_site == 0 {
        if any_detection {
            return Err(Error::Estimation("well detections at a site with zero registered wells".into()));
        }
        return Ok(Vec::new());
    }
    let w = wells_at_site as f64;
    let mut by_day: BTreeMap<u32, Vec<&DailyEstimate>> = BTreeMap::new();
    for d in site_wells.iter().flatten() {
        by_day.entry(d.day).or_default().push(d);
    }
    Ok(by_day
        .into_iter()
        .map(|(day, ests)| {
            let detected: Vec<&&DailyEstimate> = ests.iter().filter(|e| e.n_detected > 0).collect();
            let miss_all: f64 = detected.iter().map(|e| 1.0 - e.phi_hat).product();
            DailyEstimate {
                day,
                mean_rate: csum(ests.iter().map(|e| e.mean_rate)) / w,
                var: csum(ests.iter().map(|e| e.var)) / (w * w),
                phi_hat: if detected.is_empty() { 0.0 } else { 1.0 - miss_all },
                n_detected: detected.iter().map(|e| e.n_detected).sum(),
                q_total: ests.iter().map(|e| e.q_total).max().unwrap_or(0),
                floor_hits: ests.iter().map(|e| e.floor_hits).sum(),
            }
        })
        .collect())
}
