//! Instrument physics: the probability-of-detection curve of the aerial
//! sensor, the distribution of the true emission rate given a measurement,
//! and the any-detection probability of a component-day.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to any detection probability before it is used as a
/// divisor.
pub const PHI_FLOOR: f64 = 1.0e-12;

/// Constants of the probability-of-detection curve
///
/// `phi(Y, a, u) = exp(-[kappa * Y^rate_exp / ((a/1000)^altitude_exp * (u + wind_offset)^wind_exp)]^(-outer_exp))`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodParams {
    pub kappa: f64,
    pub rate_exp: f64,
    pub altitude_exp: f64,
    pub wind_offset: f64,
    pub wind_exp: f64,
    pub outer_exp: f64,
}

impl Default for PodParams {
    fn default() -> Self {
        Self {
            kappa: 0.244,
            rate_exp: 1.07,
            altitude_exp: 2.44,
            wind_offset: 2.14,
            wind_exp: 1.69,
            outer_exp: 2.53,
        }
    }
}

impl PodParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("kappa", self.kappa),
            ("rate_exp", self.rate_exp),
            ("altitude_exp", self.altitude_exp),
            ("wind_offset", self.wind_offset),
            ("wind_exp", self.wind_exp),
            ("outer_exp", self.outer_exp),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("pod.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Evaluates the curve without argument checks. Callers guarantee
    /// `rate >= 0`, `altitude > 0`, `wind >= 0`.
    pub fn eval(&self, rate: f64, altitude: f64, wind: f64) -> f64 {
        if rate <= 0.0 {
            return 0.0;
        }
        // log of the bracketed base, then exp(-base^-c) = exp(-exp(-c ln base))
        let ln_base = self.kappa.ln() + self.rate_exp * rate.ln()
            - self.altitude_exp * (altitude / 1000.0).ln()
            - self.wind_exp * (wind + self.wind_offset).ln();
        (-(-self.outer_exp * ln_base).exp()).exp()
    }
}

/// Probability that the sensor detects a point source emitting `rate` kg/h
/// from `altitude` m with wind speed `wind` m/s.
pub fn pod(rate: f64, altitude: f64, wind: f64, params: &PodParams) -> Result<f64> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::Domain(format!("emission rate must be >= 0, got {rate}")));
    }
    if !(altitude > 0.0 && altitude.is_finite()) {
        return Err(Error::Domain(format!("altitude must be > 0, got {altitude}")));
    }
    if !(wind >= 0.0 && wind.is_finite()) {
        return Err(Error::Domain(format!("wind speed must be >= 0, got {wind}")));
    }
    Ok(params.eval(rate, altitude, wind))
}

/// Log-logistic model of the true rate given a measured rate:
/// `Y | measured ~ LogLogistic(scale = bias * scale_factor * measured, shape)`.
///
/// `shape = +inf` collapses the distribution to a point mass at the scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementModel {
    /// Multiplicative bias factor `d`.
    pub bias: f64,
    /// Scale factor `alpha`.
    pub scale_factor: f64,
    /// Log-logistic shape `beta`.
    pub shape: f64,
}

impl Default for MeasurementModel {
    fn default() -> Self {
        Self {
            bias: 0.918,
            scale_factor: 0.891,
            shape: 3.82,
        }
    }
}

impl MeasurementModel {
    /// No measurement noise and no bias: every draw returns the measurement.
    pub fn exact() -> Self {
        Self {
            bias: 1.0,
            scale_factor: 1.0,
            shape: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bias.is_finite() && self.bias > 0.0) {
            return Err(Error::Config(format!("measurement.bias must be positive, got {}", self.bias)));
        }
        if !(self.scale_factor.is_finite() && self.scale_factor > 0.0) {
            return Err(Error::Config(format!(
                "measurement.scale_factor must be positive, got {}",
                self.scale_factor
            )));
        }
        if !(self.shape > 1.0) {
            return Err(Error::Config(format!(
                "measurement.shape must exceed 1 for a finite mean, got {}",
                self.shape
            )));
        }
        Ok(())
    }

    /// `E[Y | measured] / measured` implied by the log-logistic parameters.
    pub fn mean_factor(&self) -> f64 {
        let b = std::f64::consts::PI / self.shape;
        let ratio = if b == 0.0 { 1.0 } else { b / b.sin() };
        self.bias * self.scale_factor * ratio
    }

    pub fn scale(&self, measured: f64) -> f64 {
        self.bias * self.scale_factor * measured
    }
}

/// Inverse-CDF draw of the true rate for a measurement, given a uniform draw
/// in (0, 1).
pub fn sample_true_rate(measured: f64, uniform_draw: f64, model: &MeasurementModel) -> f64 {
    debug_assert!(measured >= 0.0);
    debug_assert!(uniform_draw > 0.0 && uniform_draw < 1.0);
    let scale = model.scale(measured);
    if scale == 0.0 {
        return 0.0;
    }
    scale * (uniform_draw / (1.0 - uniform_draw)).powf(1.0 / model.shape)
}

/// Bias-corrected rate: `bias * measured`.
pub fn bias_correct(measured: f64, model: &MeasurementModel) -> f64 {
    model.bias * measured
}

/// Probability of at least one detection on a component-day.
///
/// Missed passes are imputed with the mean probability of the detected
/// passes: `1 - (1 - mean)^n_missed * prod(1 - phi_q)`.
pub fn phi_any_detection(detected_phis: &[f64], n_missed: usize) -> Result<f64> {
    if detected_phis.is_empty() {
        if n_missed > 0 {
            return Err(Error::Estimation(
                "cannot impute detection probability for missed passes without any detection".into(),
            ));
        }
        return Ok(0.0);
    }
    let mean = detected_phis.iter().sum::<f64>() / detected_phis.len() as f64;
    let miss_all: f64 = detected_phis.iter().map(|p| 1.0 - p).product();
    let missed_factor = (1.0 - mean).powi(n_missed as i32);
    Ok(1.0 - missed_factor * miss_all)
}

/// Applies [`PHI_FLOOR`]; the flag reports whether the floor was active.
pub fn floor_phi(phi: f64) -> (f64, bool) {
    if phi < PHI_FLOOR {
        (PHI_FLOOR, true)
    } else {
        (phi, false)
    }
}
