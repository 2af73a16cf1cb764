//! Estimators of a component's mean emission rate on one survey day.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pod_model::{floor_phi, phi_any_detection};
use crate::sum::csum;

/// A detected pass: emission rate and its detection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub rate: f64,
    pub phi: f64,
}

impl Detection {
    pub fn new(rate: f64, phi: f64) -> Self {
        Self { rate, phi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DailyEstimate {
    pub day: u32,
    pub mean_rate: f64,
    pub var: f64,
    /// Estimated probability of at least one detection; 0 on days without
    /// detections.
    pub phi_hat: f64,
    pub n_detected: u32,
    pub q_total: u32,
    /// Probabilities raised to the floor while computing this estimate.
    pub floor_hits: u32,
}

impl DailyEstimate {
    pub fn on_day(mut self, day: u32) -> Self {
        self.day = day;
        self
    }
}

fn check_counts(detections: &[Detection], q_total: u32) -> Result<()> {
    if q_total == 0 || (q_total as usize) < detections.len() {
        return Err(Error::Estimation(format!(
            "{} detections cannot come from {q_total} passes",
            detections.len()
        )));
    }
    Ok(())
}

/// Floors every probability; returns floored copies and the hit count.
fn floored(detections: &[Detection]) -> (Vec<Detection>, u32) {
    let mut hits = 0;
    let out = detections
        .iter()
        .map(|d| {
            let (phi, hit) = floor_phi(d.phi);
            hits += hit as u32;
            Detection { rate: d.rate, phi }
        })
        .collect();
    (out, hits)
}

/// `(sum Y / phi) / Q`.
pub fn ipw_daily_mean(detections: &[Detection], q_total: u32) -> Result<f64> {
    check_counts(detections, q_total)?;
    let (dets, _) = floored(detections);
    Ok(csum(dets.iter().map(|d| d.rate / d.phi)) / q_total as f64)
}

/// `(1/Q^2) sum (1 - phi) / phi^2 * Y^2`.
pub fn ipw_daily_var(detections: &[Detection], q_total: u32) -> Result<f64> {
    check_counts(detections, q_total)?;
    let (dets, _) = floored(detections);
    let q = q_total as f64;
    Ok(csum(dets.iter().map(|d| (1.0 - d.phi) / (d.phi * d.phi) * d.rate * d.rate)) / (q * q))
}

fn phi_hat_of(dets: &[Detection], q_total: u32) -> Result<(f64, u32)> {
    if dets.is_empty() {
        return Ok((0.0, 0));
    }
    let phis: Vec<f64> = dets.iter().map(|d| d.phi).collect();
    let raw = phi_any_detection(&phis, q_total as usize - dets.len())?;
    let (phi_hat, hit) = floor_phi(raw);
    Ok((phi_hat, hit as u32))
}

pub fn ipw_daily(detections: &[Detection], q_total: u32) -> Result<DailyEstimate> {
    check_counts(detections, q_total)?;
    let (dets, hits) = floored(detections);
    let (phi_hat, hat_hit) = phi_hat_of(&dets, q_total)?;
    let q = q_total as f64;
    Ok(DailyEstimate {
        day: 0,
        mean_rate: csum(dets.iter().map(|d| d.rate / d.phi)) / q,
        var: csum(dets.iter().map(|d| (1.0 - d.phi) / (d.phi * d.phi) * d.rate * d.rate)) / (q * q),
        phi_hat,
        n_detected: dets.len() as u32,
        q_total,
        floor_hits: hits + hat_hit,
    })
}

/// `(sum Y / phi) / (sum 1 / phi)`.
pub fn hajek_daily_mean(detections: &[Detection]) -> Result<f64> {
    if detections.is_empty() {
        return Err(Error::Estimation("ratio estimator undefined on a day without detections".into()));
    }
    let (dets, _) = floored(detections);
    Ok(csum(dets.iter().map(|d| d.rate / d.phi)) / csum(dets.iter().map(|d| 1.0 / d.phi)))
}

/// Linearized variance of the ratio estimator, clipped at zero:
/// `(phi_hat / Q^2) [sum (1-phi) ((Y - m)/phi)^2 + (phi_hat - 1)(sum (Y - m)/phi)^2]`.
pub fn hajek_daily_var(detections: &[Detection], q_total: u32, phi_hat: f64) -> Result<f64> {
    check_counts(detections, q_total)?;
    let mean = hajek_daily_mean(detections)?;
    let (dets, _) = floored(detections);
    let (phi_hat, _) = floor_phi(phi_hat);
    Ok(hajek_var_inner(&dets, q_total, phi_hat, mean))
}

fn hajek_var_inner(dets: &[Detection], q_total: u32, phi_hat: f64, mean: f64) -> f64 {
    let q = q_total as f64;
    let resid = |d: &Detection| (d.rate - mean) / d.phi;
    let own = csum(dets.iter().map(|d| (1.0 - d.phi) * resid(d) * resid(d)));
    let cross = csum(dets.iter().map(resid));
    let v = phi_hat / (q * q) * (own + (phi_hat - 1.0) * cross * cross);
    v.max(0.0)
}

pub fn hajek_daily(detections: &[Detection], q_total: u32) -> Result<DailyEstimate> {
    check_counts(detections, q_total)?;
    let mean = hajek_daily_mean(detections)?;
    let (dets, hits) = floored(detections);
    let (phi_hat, hat_hit) = phi_hat_of(&dets, q_total)?;
    Ok(DailyEstimate {
        day: 0,
        mean_rate: mean,
        var: hajek_var_inner(&dets, q_total, phi_hat, mean),
        phi_hat,
        n_detected: dets.len() as u32,
        q_total,
        floor_hits: hits + hat_hit,
    })
}

/// Mean and variance of the IPW daily estimator under the starred stage III
/// design, where passes have inclusion probability `phi / phi_hat` and are
/// jointly included with `phi_q phi_r / phi_hat`.
pub fn ipw_daily_modified(detections: &[Detection], q_total: u32, phi_hat: f64) -> Result<(f64, f64)> {
    check_counts(detections, q_total)?;
    let (dets, _) = floored(detections);
    let q = q_total as f64;
    let pi: Vec<f64> = dets.iter().map(|d| d.phi / phi_hat).collect();
    let mean = csum(dets.iter().zip(&pi).map(|(d, p)| d.rate / p)) / q;
    let mut terms = Vec::with_capacity(dets.len() * dets.len());
    for (i, di) in dets.iter().enumerate() {
        for (j, dj) in dets.iter().enumerate() {
            let joint = if i == j { pi[i] } else { di.phi * dj.phi / phi_hat };
            terms.push((joint - pi[i] * pi[j]) / joint * (di.rate / pi[i]) * (dj.rate / pi[j]));
        }
    }
    Ok((mean, csum(terms) / (q * q)))
}
