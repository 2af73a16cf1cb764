//! Inventory reports in kt/y.
//!
//! Estimation runs in kg/h; conversion happens here and nowhere else.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::Horizon;
use crate::error::{Error, Result};
use crate::estimators::{wald_ci, DesignEstimate, DesignView, EstimationConfig, EstimationDiagnostics, VarianceParts};
use crate::manifest::RunManifest;
use crate::measurement_mc::McResult;
use crate::units::{kg_h_to_kt_y, var_kg_h_to_kt_y};

pub const POPULATION: &str = "population";

/// How measurement error entered the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementMode {
    /// Measured rates used as reported.
    Raw,
    BiasCorrect,
    Mc,
}

impl MeasurementMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "bias-correct" => Ok(Self::BiasCorrect),
            "mc" => Ok(Self::Mc),
            _ => Err(Error::Config(format!(
                "unknown measurement mode {s:?}, expected raw, bias-correct or mc"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::BiasCorrect => "bias-correct",
            Self::Mc => "mc",
        }
    }
}

/// One row of the inventory table; all values in kt/y or (kt/y)^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub stratum: String,
    pub total: f64,
    pub v_stage1: f64,
    pub v_stage2: f64,
    pub v_stage3: f64,
    pub v_measurement: f64,
    pub v_total: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl ReportRow {
    fn new(stratum: &str, total_kg_h: f64, parts: VarianceParts, var_m_kg_h: f64, level: f64) -> Result<Self> {
        let total = kg_h_to_kt_y(total_kg_h);
        let v_stage1 = var_kg_h_to_kt_y(parts.stage1);
        let v_stage2 = var_kg_h_to_kt_y(parts.stage2);
        let v_stage3 = var_kg_h_to_kt_y(parts.stage3);
        let v_measurement = var_kg_h_to_kt_y(var_m_kg_h);
        let v_total = v_stage1 + v_stage2 + v_stage3 + v_measurement;
        let (ci_lower, ci_upper) = wald_ci(total, v_total, level)?;
        Ok(Self {
            stratum: stratum.to_string(),
            total,
            v_stage1,
            v_stage2,
            v_stage3,
            v_measurement,
            v_total,
            ci_lower,
            ci_upper,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryReport {
    pub manifest: Option<RunManifest>,
    pub config: EstimationConfig,
    pub measurement: MeasurementMode,
    pub iterations: Option<usize>,
    /// Strata in frame order, then the population row.
    pub rows: Vec<ReportRow>,
    pub diagnostics: Option<EstimationDiagnostics>,
    pub phi_floor_hits: u64,
}

impl InventoryReport {
    pub fn from_design(est: &DesignEstimate, measurement: MeasurementMode) -> Result<Self> {
        let level = est.config.ci_level;
        let mut rows = est
            .strata
            .iter()
            .map(|s| ReportRow::new(&s.name, s.total, s.parts, 0.0, level))
            .collect::<Result<Vec<_>>>()?;
        rows.push(ReportRow::new(POPULATION, est.total, est.parts, 0.0, level)?);
        Ok(Self {
            manifest: None,
            config: est.config,
            measurement,
            iterations: None,
            rows,
            phi_floor_hits: est.diagnostics.phi_floor_hits,
            diagnostics: Some(est.diagnostics.clone()),
        })
    }

    pub fn from_mc(result: &McResult) -> Result<Self> {
        let level = result.config.estimation.ci_level;
        let mut rows = result
            .strata
            .iter()
            .chain(std::iter::once(&result.population))
            .map(|s| ReportRow::new(&s.name, s.tau, s.parts, s.var_measurement, level))
            .collect::<Result<Vec<_>>>()?;
        if let Some(last) = rows.last_mut() {
            last.stratum = POPULATION.to_string();
        }
        Ok(Self {
            manifest: None,
            config: result.config.estimation,
            measurement: MeasurementMode::Mc,
            iterations: Some(result.config.iterations),
            rows,
            diagnostics: None,
            phi_floor_hits: result.phi_floor_hits,
        })
    }

    pub fn with_manifest(mut self, manifest: RunManifest) -> Self {
        self.manifest = Some(manifest);
        self
    }

    pub fn population(&self) -> &ReportRow {
        self.rows.last().expect("report has a population row")
    }

    pub fn row(&self, stratum: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.stratum == stratum)
    }

    /// Short variant tag such as `ipw_year365_mc`.
    pub fn variant_label(&self) -> String {
        variant_label(&self.config, self.measurement)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn comment(&self) -> String {
        self.manifest.as_ref().map(|m| m.csv_comment()).unwrap_or_default()
    }

    /// Table with two-decimal display values.
    pub fn write_table_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "stratum",
            "total_kt_y",
            "v_stage1",
            "v_stage2",
            "v_stage3",
            "v_measurement",
            "v_total",
            "ci_lower",
            "ci_upper",
        ])?;
        for r in &self.rows {
            let f = |x: f64| format!("{x:.2}");
            w.write_record([
                r.stratum.clone(),
                f(r.total),
                f(r.v_stage1),
                f(r.v_stage2),
                f(r.v_stage3),
                f(r.v_measurement),
                f(r.v_total),
                f(r.ci_lower),
                f(r.ci_upper),
            ])?;
        }
        let body = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
        crate::frame::write_commented(path, &self.comment(), &body)
    }

    /// Long-format variance shares per stratum, full precision.
    pub fn write_decomposition_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["stratum", "source", "variance", "share"])?;
        for r in &self.rows {
            for (source, v) in [
                ("stage1", r.v_stage1),
                ("stage2", r.v_stage2),
                ("stage3", r.v_stage3),
                ("measurement", r.v_measurement),
            ] {
                let share = if r.v_total > 0.0 { v / r.v_total } else { 0.0 };
                w.write_record([r.stratum.clone(), source.to_string(), v.to_string(), share.to_string()])?;
            }
        }
        let body = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
        crate::frame::write_commented(path, &self.comment(), &body)
    }

    /// Writes `report.json`, `table.csv` and `decomposition.csv` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_json(&dir.join("report.json"))?;
        self.write_table_csv(&dir.join("table.csv"))?;
        self.write_decomposition_csv(&dir.join("decomposition.csv"))
    }
}

pub fn variant_label(config: &EstimationConfig, measurement: MeasurementMode) -> String {
    let horizon = match config.horizon {
        Horizon::Observed => "observed".to_string(),
        Horizon::Fixed(d) => format!("year{d}"),
    };
    let view = match config.design {
        DesignView::Original => "",
        DesignView::Modified => "_modified",
    };
    format!("{}_{horizon}_{}{view}", config.estimator.label(), measurement.label())
}

/// Parses a table CSV written by [`InventoryReport::write_table_csv`].
pub fn read_table_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse {
                    file: path.to_path_buf(),
                    row: out.len() + 2,
                    message: format!("column {i} is not a number"),
                })
        };
        out.push(ReportRow {
            stratum: rec.get(0).unwrap_or_default().to_string(),
            total: num(1)?,
            v_stage1: num(2)?,
            v_stage2: num(3)?,
            v_stage3: num(4)?,
            v_measurement: num(5)?,
            v_total: num(6)?,
            ci_lower: num(7)?,
            ci_upper: num(8)?,
        });
    }
    Ok(out)
}
