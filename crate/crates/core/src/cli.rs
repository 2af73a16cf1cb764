//! Command-line interface.
//!
//! Every artifact a subcommand writes embeds a [`RunManifest`];
//! `msinv replay <artifact>` re-runs the recorded command into a new output
//! directory and reproduces the original bytes.
//!
//! Exit codes: 0 success, 2 input or schema error, 3 estimation error,
//! 4 configuration error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::design::Horizon;
use crate::error::{Error, Result};
use crate::estimators::{total_inventory, Decomposition, DesignView, EstimationConfig, Estimator};
use crate::frame::{self, SurveyFrame, SurveyPaths};
use crate::manifest::{sha256_file, RunManifest};
use crate::measurement_mc::{convergence_trace, run_mc, write_trace_csv, McConfig};
use crate::planner::{gamma_table, predict_variance, quantile, write_plan_csv, PlanScenario};
use crate::pod_model::{MeasurementModel, PodParams};
use crate::report::{InventoryReport, MeasurementMode};
use crate::simlab::{run_study, write_study_csv, SimConfig};

/// Default simulation configuration, fitted from the packaged subset.
pub const DEFAULT_SIM_CONFIG: &str = include_str!("../data/sim_default.toml");

#[derive(Debug, Parser)]
#[command(name = "msinv", version, about = "Design-based methane inventories from aerial survey passes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the inventory from a survey frame.
    Estimate(EstimateArgs),
    /// Run the simulation study.
    Simulate(SimulateArgs),
    /// Predict design variances for a planning scenario.
    Plan(PlanArgs),
    /// Report frame diagnostics and detection-day probabilities.
    Diagnose(DiagnoseArgs),
    /// Re-run the command recorded in an artifact's manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory holding passes.csv, frame.csv and strata.csv.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub passes: Option<PathBuf>,
    #[arg(long)]
    pub frame: Option<PathBuf>,
    #[arg(long)]
    pub strata: Option<PathBuf>,
}

impl DataArgs {
    fn paths(&self) -> Result<SurveyPaths> {
        let base = self.data.as_deref().map(SurveyPaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, from_dir: Option<&PathBuf>, name: &str| {
            explicit
                .clone()
                .or_else(|| from_dir.cloned())
                .ok_or_else(|| Error::Config(format!("missing --{name} (or --data)")))
        };
        Ok(SurveyPaths {
            passes: pick(&self.passes, base.as_ref().map(|b| &b.passes), "passes")?,
            frame: pick(&self.frame, base.as_ref().map(|b| &b.frame), "frame")?,
            strata: pick(&self.strata, base.as_ref().map(|b| &b.strata), "strata")?,
        })
    }

    fn record(&self, mut m: RunManifest) -> Result<(RunManifest, SurveyFrame)> {
        let paths = self.paths()?;
        for (name, p) in [("passes", &paths.passes), ("frame", &paths.frame), ("strata", &paths.strata)] {
            m = m.flag(name, p.display()).input(name, p)?;
        }
        let frame = paths.load()?;
        Ok((m, frame))
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// `ipw` or `hajek`.
    #[arg(long, default_value = "ipw")]
    pub estimator: String,
    /// `observed` or `year:<D>`.
    #[arg(long, default_value = "year:365")]
    pub stage2: String,
    /// `raw`, `bias-correct` or `mc`.
    #[arg(long, default_value = "mc")]
    pub measurement: String,
    #[arg(long, default_value_t = 8000)]
    pub mc_iters: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub ci_level: f64,
    /// `corrected` or `printed`.
    #[arg(long, default_value = "corrected")]
    pub decomposition: String,
    /// `original` or `modified` (IPW only; the ratio estimator always uses
    /// the modified design).
    #[arg(long, default_value = "original")]
    pub design: String,
    /// Run both estimators, both stage II modes and both measurement modes.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub all_variants: bool,
    /// Write the convergence series of MC runs.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub trace: bool,
    /// Draw MC true rates without conditioning on detection.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub unconditional_draws: bool,
    /// TOML file overriding `[measurement]` and `[pod]` parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for MC runs (default: MSINV_THREADS or all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Simulation TOML; the packaged default when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// Scenario JSON.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value = "ipw")]
    pub estimator: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Any JSON or CSV artifact written by msinv.
    pub artifact: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Skip the input digest check.
    #[arg(long, default_value_t = false)]
    pub no_verify: bool,
}

/// Physical model overrides accepted by `--config` for estimate/diagnose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub measurement: MeasurementModel,
    pub pod: PodParams,
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.measurement.validate()?;
        cfg.pod.validate()?;
        Ok(cfg)
    }
}

/// Settings fixed when replaying, so output bytes match the original run.
#[derive(Debug, Clone, Copy, Default)]
struct RunContext {
    timestamp: Option<u64>,
}

impl RunContext {
    fn manifest(&self, command: &str) -> Result<RunManifest> {
        let mut m = RunManifest::new(command)?;
        if let Some(t) = self.timestamp {
            m.timestamp = t;
        }
        Ok(m)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            print!("{e}");
            Error::Config(String::new())
        }
        _ => Error::Config(e.to_string()),
    })?;
    dispatch(cli.command, RunContext::default())
}

/// Entry point for the binary: prints errors and returns the exit code.
pub fn main_with_args(args: Vec<std::ffi::OsString>) -> i32 {
    let is_info = args
        .iter()
        .any(|a| matches!(a.to_str(), Some("--help" | "-h" | "--version" | "-V" | "help")));
    match run(args) {
        Ok(()) => 0,
        Err(Error::Config(m)) if m.is_empty() && is_info => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, ctx: RunContext) -> Result<()> {
    match command {
        Command::Estimate(a) => cmd_estimate(&a, ctx),
        Command::Simulate(a) => cmd_simulate(&a, ctx),
        Command::Plan(a) => cmd_plan(&a, ctx),
        Command::Diagnose(a) => cmd_diagnose(&a, ctx),
        Command::Replay(a) => cmd_replay(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn parse_decomposition(s: &str) -> Result<Decomposition> {
    match s {
        "corrected" => Ok(Decomposition::Corrected),
        "printed" => Ok(Decomposition::Printed),
        _ => Err(Error::Config(format!("decomposition must be corrected or printed, got {s:?}"))),
    }
}

fn parse_design(s: &str) -> Result<DesignView> {
    match s {
        "original" => Ok(DesignView::Original),
        "modified" => Ok(DesignView::Modified),
        _ => Err(Error::Config(format!("design must be original or modified, got {s:?}"))),
    }
}

fn estimate_one(
    frame: &SurveyFrame,
    config: EstimationConfig,
    mode: MeasurementMode,
    a: &EstimateArgs,
    model: &ModelConfig,
) -> Result<(InventoryReport, Option<crate::measurement_mc::McResult>)> {
    match mode {
        MeasurementMode::Raw => Ok((
            InventoryReport::from_design(&total_inventory(frame, &model.pod, 1.0, &config)?, mode)?,
            None,
        )),
        MeasurementMode::BiasCorrect => Ok((
            InventoryReport::from_design(
                &total_inventory(frame, &model.pod, model.measurement.bias, &config)?,
                mode,
            )?,
            None,
        )),
        MeasurementMode::Mc => {
            let mc = run_mc(
                frame,
                &McConfig {
                    iterations: a.mc_iters,
                    seed: a.seed,
                    estimation: config,
                    measurement: model.measurement,
                    pod: model.pod,
                    trace: a.trace,
                    condition_on_detection: !a.unconditional_draws,
                    threads: a.threads,
                },
            )?;
            Ok((InventoryReport::from_mc(&mc)?, Some(mc)))
        }
    }
}

fn cmd_estimate(a: &EstimateArgs, ctx: RunContext) -> Result<()> {
    let base = EstimationConfig {
        estimator: Estimator::parse(&a.estimator)?,
        horizon: Horizon::parse(&a.stage2)?,
        decomposition: parse_decomposition(&a.decomposition)?,
        design: parse_design(&a.design)?,
        ci_level: a.ci_level,
    };
    let mode = MeasurementMode::parse(&a.measurement)?;
    let mut m = ctx
        .manifest("estimate")?
        .flag("estimator", &a.estimator)
        .flag("stage2", &a.stage2)
        .flag("measurement", &a.measurement)
        .flag("mc-iters", a.mc_iters)
        .flag("seed", a.seed)
        .flag("ci-level", a.ci_level)
        .flag("decomposition", &a.decomposition)
        .flag("design", &a.design)
        .flag("all-variants", a.all_variants)
        .flag("trace", a.trace)
        .flag("unconditional-draws", a.unconditional_draws)
        .seed(a.seed);
    if let Some(t) = a.threads {
        m = m.flag("threads", t);
    }
    let model = match &a.config {
        Some(p) => {
            m = m.flag("config", p.display()).input("config", p)?;
            ModelConfig::load(p)?
        }
        None => ModelConfig::default(),
    };
    let (m, frame) = a.data.record(m)?;

    let variants: Vec<(EstimationConfig, MeasurementMode)> = if a.all_variants {
        let year = match base.horizon {
            Horizon::Fixed(d) => d,
            Horizon::Observed => 365,
        };
        let mut v = Vec::new();
        for estimator in [Estimator::Ipw, Estimator::Hajek] {
            for horizon in [Horizon::Observed, Horizon::Fixed(year)] {
                for mode in [MeasurementMode::BiasCorrect, MeasurementMode::Mc] {
                    v.push((
                        EstimationConfig {
                            estimator,
                            horizon,
                            ..base
                        },
                        mode,
                    ));
                }
            }
        }
        v
    } else {
        vec![(base, mode)]
    };

    create_dir(&a.out)?;
    for (config, mode) in variants {
        let (report, mc) = estimate_one(&frame, config, mode, a, &model)?;
        let report = report.with_manifest(m.clone());
        let dir = if a.all_variants {
            a.out.join(report.variant_label())
        } else {
            a.out.clone()
        };
        report.write_all(&dir)?;
        if let Some(mc) = mc.filter(|r| r.trace.is_some()) {
            write_trace_csv(&convergence_trace(&mc)?, &dir.join("trace.csv"))?;
        }
        let p = report.population();
        println!(
            "{:<28} total {:>10.3} kt/y  var {:>10.3}  CI [{:.3}, {:.3}]",
            report.variant_label(),
            p.total,
            p.v_total,
            p.ci_lower,
            p.ci_upper
        );
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, ctx: RunContext) -> Result<()> {
    let mut m = ctx.manifest("simulate")?;
    let mut config = match &a.config {
        Some(p) => {
            m = m.flag("config", p.display()).input("config", p)?;
            SimConfig::load(p)?
        }
        None => SimConfig::from_toml(DEFAULT_SIM_CONFIG)?,
    };
    if let Some(r) = a.reps {
        config.replications = r;
        m = m.flag("reps", r);
    }
    if let Some(s) = a.seed {
        config.seed = s;
        m = m.flag("seed", s);
    }
    config.validate()?;
    let m = m.seed(config.seed);
    let result = run_study(&config)?;
    create_dir(&a.out)?;
    write_study_csv(&result, &a.out.join("simulation.csv"), &m.csv_comment())?;
    let json = serde_json::json!({ "manifest": m, "config": config, "result": result });
    let path = a.out.join("simulation.json");
    std::fs::write(&path, serde_json::to_string_pretty(&json)? + "\n").map_err(|e| Error::io(&path, e))?;
    for r in &result.rows {
        println!(
            "{:<20} {:<15} bias {:>7.2}%  coverage {:.3}",
            r.stratum, r.variant, r.bias_pct, r.coverage
        );
    }
    Ok(())
}

fn cmd_plan(a: &PlanArgs, ctx: RunContext) -> Result<()> {
    let m = ctx
        .manifest("plan")?
        .flag("scenario", a.scenario.display())
        .flag("estimator", &a.estimator)
        .input("scenario", &a.scenario)?;
    let scenario = PlanScenario::load(&a.scenario)?;
    let rows = predict_variance(&scenario, Estimator::parse(&a.estimator)?)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_plan_csv(&rows, &a.out, &m.csv_comment())?;
    for r in &rows {
        println!("{:<20} V_I {:.4e}  V_II {:.4e}  V_III {:.4e}", r.stratum, r.stage1, r.stage2, r.stage3);
    }
    Ok(())
}

/// Summary written by `diagnose`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisSummary {
    pub manifest: RunManifest,
    pub components: usize,
    pub passes: usize,
    pub median_passes_per_day: f64,
    pub single_day_components: usize,
    pub zero_emitting_strata: Vec<String>,
    /// Quartiles (Q1, median, Q3) of the conservative detection-day
    /// probability over components with a detection.
    pub gamma_quartiles: Option<[f64; 3]>,
    pub diagnostics: frame::FrameDiagnostics,
    pub messages: Vec<String>,
}

pub fn diagnose(frame: &SurveyFrame, pod: &PodParams, manifest: RunManifest) -> Result<(DiagnosisSummary, Vec<crate::planner::GammaRow>)> {
    let diag = frame::validate(frame);
    let gamma = gamma_table(frame, pod)?;
    let values: Vec<f64> = gamma.iter().map(|g| g.gamma).collect();
    let quartiles = match (quantile(&values, 0.25), quantile(&values, 0.5), quantile(&values, 0.75)) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    Ok((
        DiagnosisSummary {
            manifest,
            components: frame.components().len(),
            passes: frame.passes().len(),
            median_passes_per_day: frame::median_passes_per_day(frame),
            single_day_components: diag.single_day_components.len(),
            zero_emitting_strata: diag.zero_emitting_strata.clone(),
            gamma_quartiles: quartiles,
            messages: diag.messages(),
            diagnostics: diag,
        },
        gamma,
    ))
}

fn cmd_diagnose(a: &DiagnoseArgs, ctx: RunContext) -> Result<()> {
    let mut m = ctx.manifest("diagnose")?;
    let model = match &a.config {
        Some(p) => {
            m = m.flag("config", p.display()).input("config", p)?;
            ModelConfig::load(p)?
        }
        None => ModelConfig::default(),
    };
    let (m, frame) = a.data.record(m)?;
    let (summary, gamma) = diagnose(&frame, &model.pod, m)?;
    create_dir(&a.out)?;
    let path = a.out.join("diagnostics.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for g in &gamma {
        w.serialize(g)?;
    }
    let path = a.out.join("gamma.csv");
    let body = w.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
    frame::write_commented(&path, &summary.manifest.csv_comment(), &body)?;

    println!("components {}  passes {}", summary.components, summary.passes);
    println!("median passes per component-day {}", summary.median_passes_per_day);
    if let Some([q1, q2, q3]) = summary.gamma_quartiles {
        println!("gamma quartiles {q1:.2} {q2:.2} {q3:.2}");
    }
    for msg in &summary.messages {
        println!("{msg}");
    }
    Ok(())
}

/// Rebuilds the argument vector recorded in a manifest.
pub fn manifest_args(m: &RunManifest, out: &Path) -> Vec<String> {
    let mut args = vec!["msinv".to_string(), m.command.clone()];
    args.extend(m.flags.iter().map(|(k, v)| format!("--{k}={v}")));
    args.push(format!("--out={}", out.display()));
    args
}

fn cmd_replay(a: &ReplayArgs) -> Result<()> {
    let m = RunManifest::read_from(&a.artifact)?;
    if m.command == "replay" {
        return Err(Error::Config("cannot replay a replay".into()));
    }
    if !a.no_verify {
        let mut changed = BTreeMap::new();
        for (name, digest) in &m.inputs {
            let path = m
                .flags
                .get(name)
                .ok_or_else(|| Error::Config(format!("manifest has no path for input {name:?}")))?;
            let now = sha256_file(Path::new(path))?;
            if &now != digest {
                changed.insert(name.clone(), path.clone());
            }
        }
        if !changed.is_empty() {
            return Err(Error::Integrity(format!("inputs changed since the recorded run: {changed:?}")));
        }
    }
    let cli = Cli::try_parse_from(manifest_args(&m, &a.out)).map_err(|e| Error::Config(e.to_string()))?;
    dispatch(
        cli.command,
        RunContext {
            timestamp: Some(m.timestamp),
        },
    )
}
