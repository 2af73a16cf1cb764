//! Monte Carlo propagation of measurement error through the design-based
//! estimator.
//!
//! Iteration `b` draws a true rate for every detected pass from the
//! log-logistic model around its measurement, recomputes detection
//! probabilities at the drawn rates and reruns the estimator. The point
//! estimate is the mean over iterations; the measurement variance is the
//! sample variance of the iteration totals and the design parts are the
//! mean of the per-iteration (clipped) parts.
//!
//! By default each true rate is drawn conditional on the pass having been
//! detected, i.e. from the log-logistic density weighted by the POD at the
//! drawn rate (rejection sampling). Unconditional draws make `Y / phi(Y)`
//! heavy enough near zero rate that its expectation is infinite, so a
//! handful of draws dominate the mean; `condition_on_detection = false`
//! restores them.
//!
//! Draws come from a ChaCha8 stream selected by `b`, consumed in canonical
//! pass order, so the result depends only on `(frame, config)` and not on
//! the number of worker threads.

use rand::distr::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimationConfig, SampleLayout, VarianceParts};
use crate::frame::SurveyFrame;
use crate::pod_model::{pod, sample_true_rate, MeasurementModel, PodParams};
use crate::sum::{csum, CompensatedSum};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "MSINV_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub iterations: usize,
    pub seed: u64,
    pub estimation: EstimationConfig,
    pub measurement: MeasurementModel,
    pub pod: PodParams,
    pub trace: bool,
    pub condition_on_detection: bool,
    /// Worker threads; `None` reads [`THREADS_ENV`], then uses all cores.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            iterations: 8000,
            seed: 1,
            estimation: EstimationConfig::default(),
            measurement: MeasurementModel::default(),
            pod: PodParams::default(),
            trace: false,
            condition_on_detection: true,
            threads: None,
        }
    }
}

/// Totals and clipped parts of one iteration, population then strata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub total: f64,
    pub parts: VarianceParts,
    pub strata: Vec<(f64, VarianceParts)>,
    pub phi_floor_hits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub name: String,
    /// Mean of the iteration totals, kg/h.
    pub tau: f64,
    /// Sample variance of the iteration totals.
    pub var_measurement: f64,
    /// Mean of the clipped design parts.
    pub parts: VarianceParts,
}

impl McSummary {
    pub fn var_total(&self) -> f64 {
        self.var_measurement + self.parts.sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub config: McConfig,
    pub population: McSummary,
    pub strata: Vec<McSummary>,
    /// Probabilities floored during estimation, summed over iterations.
    pub phi_floor_hits: u64,
    /// Per-iteration records, kept when tracing.
    pub trace: Option<Vec<IterationRecord>>,
}

fn resolve_threads(requested: Option<usize>) -> Result<usize> {
    if let Some(n) = requested {
        return if n == 0 {
            Err(Error::Config("thread count must be positive".into()))
        } else {
            Ok(n)
        };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Proposals tried per pass before keeping the most detectable one.
pub const MAX_PROPOSALS: usize = 10_000;

/// Draws the true rates of iteration `b`.
pub fn draw_rates(layout: &SampleLayout, config: &McConfig, b: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(b);
    let model = &config.measurement;
    layout
        .observed()
        .iter()
        .map(|o| {
            if !config.condition_on_detection || o.measured_rate == 0.0 {
                return Ok(sample_true_rate(o.measured_rate, Open01.sample(&mut rng), model));
            }
            let mut best = (f64::NEG_INFINITY, 0.0);
            for _ in 0..MAX_PROPOSALS {
                let y = sample_true_rate(o.measured_rate, Open01.sample(&mut rng), model);
                let phi = pod(y, o.altitude, o.wind_speed, &config.pod)?;
                let u: f64 = Open01.sample(&mut rng);
                if u < phi {
                    return Ok(y);
                }
                if phi > best.0 {
                    best = (phi, y);
                }
            }
            Ok(best.1)
        })
        .collect()
}

fn run_iteration(layout: &SampleLayout, config: &McConfig, b: usize) -> Result<IterationRecord> {
    let rates = draw_rates(layout, config, b as u64)?;
    let sample = layout.sample(&rates, &config.pod)?;
    let est = estimate(&sample, &config.estimation)?;
    Ok(IterationRecord {
        total: est.total,
        parts: est.parts,
        strata: est.strata.iter().map(|s| (s.total, s.parts)).collect(),
        phi_floor_hits: est.diagnostics.phi_floor_hits,
    })
}

fn summarize(name: &str, values: impl Iterator<Item = (f64, VarianceParts)> + Clone, n: usize) -> McSummary {
    let nf = n as f64;
    let tau = csum(values.clone().map(|(t, _)| t)) / nf;
    let var_measurement = if n > 1 {
        csum(values.clone().map(|(t, _)| (t - tau) * (t - tau))) / (nf - 1.0)
    } else {
        0.0
    };
    let mut sums = [CompensatedSum::new(); 3];
    for (_, p) in values {
        sums[0].add(p.stage1);
        sums[1].add(p.stage2);
        sums[2].add(p.stage3);
    }
    McSummary {
        name: name.to_string(),
        tau,
        var_measurement,
        parts: VarianceParts {
            stage1: sums[0].value() / nf,
            stage2: sums[1].value() / nf,
            stage3: sums[2].value() / nf,
        },
    }
}

pub fn run_mc(frame: &SurveyFrame, config: &McConfig) -> Result<McResult> {
    if config.iterations < 2 {
        return Err(Error::Config(format!("need at least 2 iterations, got {}", config.iterations)));
    }
    config.measurement.validate()?;
    config.pod.validate()?;
    let layout = SampleLayout::from_frame(frame);
    let threads = resolve_threads(config.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let records: Vec<IterationRecord> = pool.install(|| {
        (0..config.iterations)
            .into_par_iter()
            .map(|b| {
                run_iteration(&layout, config, b).map_err(|e| Error::Iteration {
                    iteration: b,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let n = records.len();
    let population = summarize("population", records.iter().map(|r| (r.total, r.parts)), n);
    let strata = frame
        .strata()
        .iter()
        .enumerate()
        .map(|(h, s)| summarize(&s.name, records.iter().map(move |r| r.strata[h]), n))
        .collect();
    Ok(McResult {
        config: *config,
        population,
        strata,
        phi_floor_hits: records.iter().map(|r| r.phi_floor_hits).sum(),
        trace: config.trace.then_some(records),
    })
}

/// One row of the convergence series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub stratum: String,
    pub b: usize,
    pub cum_var_design: f64,
}

/// Cumulative mean of the design variance (sum of the three clipped parts)
/// after each iteration, per stratum and for the population.
pub fn convergence_trace(result: &McResult) -> Result<Vec<TracePoint>> {
    let records = result
        .trace
        .as_ref()
        .ok_or_else(|| Error::Config("convergence trace requested but tracing was disabled".into()))?;
    let mut out = Vec::with_capacity(records.len() * (result.strata.len() + 1));
    let mut series = |name: &str, value: &dyn Fn(&IterationRecord) -> f64| {
        let mut acc = CompensatedSum::new();
        for (i, r) in records.iter().enumerate() {
            acc.add(value(r));
            out.push(TracePoint {
                stratum: name.to_string(),
                b: i + 1,
                cum_var_design: acc.value() / (i + 1) as f64,
            });
        }
    };
    for (h, s) in result.strata.iter().enumerate() {
        series(&s.name, &|r| r.strata[h].1.sum());
    }
    series("population", &|r| r.parts.sum());
    Ok(out)
}

pub fn write_trace_csv(points: &[TracePoint], path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
