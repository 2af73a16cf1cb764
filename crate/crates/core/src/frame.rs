//! Survey frame: strata, the component registry and pass records.
//!
//! A [`SurveyFrame`] is immutable once built. Passes are kept in a canonical
//! order (registry order of the component, then day, then pass index) so that
//! every downstream computation visits them in the same sequence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Soft ceiling on passes per component-day; exceeding it is a warning.
pub const TYPICAL_MAX_PASSES: u32 = 5;

/// Strata smaller than this are flagged for post-stratification stability.
pub const MIN_STRATUM_SAMPLE: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumDef {
    pub name: String,
    pub n_sampled: u32,
    pub n_population: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentRef {
    pub component_id: String,
    pub facility_id: String,
    pub site_id: String,
    pub stratum: String,
    pub is_well: bool,
    /// Number of wells registered at the site; 0 when unknown or irrelevant.
    pub wells_at_site: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pass {
    pub component_id: String,
    pub day: u32,
    pub pass: u32,
    pub detected: bool,
    pub measured_rate: Option<f64>,
    pub wind_speed: Option<f64>,
    pub altitude: Option<f64>,
}

impl Pass {
    pub fn miss(component_id: impl Into<String>, day: u32, pass: u32) -> Self {
        Self {
            component_id: component_id.into(),
            day,
            pass,
            detected: false,
            measured_rate: None,
            wind_speed: None,
            altitude: None,
        }
    }

    pub fn hit(component_id: impl Into<String>, day: u32, pass: u32, rate: f64, wind: f64, altitude: f64) -> Self {
        Self {
            component_id: component_id.into(),
            day,
            pass,
            detected: true,
            measured_rate: Some(rate),
            wind_speed: Some(wind),
            altitude: Some(altitude),
        }
    }
}

/// Contiguous run of passes for one component on one day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayBlock {
    pub day: u32,
    pub start: usize,
    pub end: usize,
}

impl DayBlock {
    pub fn q_total(&self) -> u32 {
        (self.end - self.start) as u32
    }
}

#[derive(Debug, Clone)]
pub struct SurveyFrame {
    strata: Vec<StratumDef>,
    components: Vec<ComponentRef>,
    passes: Vec<Pass>,
    wells_per_site: BTreeMap<String, u32>,
    stratum_index: HashMap<String, usize>,
    component_index: HashMap<String, usize>,
    days: Vec<Vec<DayBlock>>,
}

impl SurveyFrame {
    /// Validates and canonicalizes the three tables.
    pub fn new(strata: Vec<StratumDef>, components: Vec<ComponentRef>, mut passes: Vec<Pass>) -> Result<Self> {
        let mut stratum_index = HashMap::new();
        for (i, s) in strata.iter().enumerate() {
            if s.n_sampled < 1 || s.n_sampled > s.n_population {
                return Err(Error::Integrity(format!(
                    "stratum {:?}: need 1 <= n_sampled <= n_population, got {} and {}",
                    s.name, s.n_sampled, s.n_population
                )));
            }
            if stratum_index.insert(s.name.clone(), i).is_some() {
                return Err(Error::Integrity(format!("stratum {:?} defined twice", s.name)));
            }
        }

        let mut component_index = HashMap::new();
        let mut facility_home: HashMap<&str, (&str, &str)> = HashMap::new();
        let mut wells_per_site: BTreeMap<String, u32> = BTreeMap::new();
        for (i, c) in components.iter().enumerate() {
            if !stratum_index.contains_key(&c.stratum) {
                return Err(Error::Integrity(format!(
                    "component {:?} references unknown stratum {:?}",
                    c.component_id, c.stratum
                )));
            }
            if component_index.insert(c.component_id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("component {:?} registered twice", c.component_id)));
            }
            match facility_home.get(c.facility_id.as_str()) {
                Some(&(site, stratum)) if site != c.site_id || stratum != c.stratum => {
                    return Err(Error::Integrity(format!(
                        "facility {:?} appears under more than one site or stratum",
                        c.facility_id
                    )));
                }
                _ => {
                    facility_home.insert(&c.facility_id, (&c.site_id, &c.stratum));
                }
            }
            if c.is_well {
                if c.wells_at_site == 0 {
                    return Err(Error::Integrity(format!(
                        "well component {:?} has wells_at_site = 0",
                        c.component_id
                    )));
                }
                match wells_per_site.get(&c.site_id) {
                    Some(&w) if w != c.wells_at_site => {
                        return Err(Error::Integrity(format!(
                            "site {:?} reports conflicting well counts {} and {}",
                            c.site_id, w, c.wells_at_site
                        )));
                    }
                    _ => {
                        wells_per_site.insert(c.site_id.clone(), c.wells_at_site);
                    }
                }
            }
        }

        for p in &passes {
            if !component_index.contains_key(&p.component_id) {
                return Err(Error::Integrity(format!(
                    "pass references unknown component {:?}",
                    p.component_id
                )));
            }
            check_pass_fields(p).map_err(Error::Integrity)?;
        }

        passes.sort_by(|a, b| {
            component_index[&a.component_id]
                .cmp(&component_index[&b.component_id])
                .then(a.day.cmp(&b.day))
                .then(a.pass.cmp(&b.pass))
        });
        for w in passes.windows(2) {
            if w[0].component_id == w[1].component_id && w[0].day == w[1].day && w[0].pass == w[1].pass {
                return Err(Error::DuplicatePass {
                    component: w[0].component_id.clone(),
                    day: w[0].day,
                    pass: w[0].pass,
                });
            }
        }

        let mut days: Vec<Vec<DayBlock>> = vec![Vec::new(); components.len()];
        let mut i = 0;
        while i < passes.len() {
            let ci = component_index[&passes[i].component_id];
            let day = passes[i].day;
            let start = i;
            while i < passes.len() && passes[i].component_id == passes[start].component_id && passes[i].day == day {
                i += 1;
            }
            days[ci].push(DayBlock { day, start, end: i });
        }
        if let Some(ci) = days.iter().position(|d| d.is_empty()) {
            return Err(Error::Integrity(format!(
                "component {:?} is registered but has no passes",
                components[ci].component_id
            )));
        }

        Ok(Self {
            strata,
            components,
            passes,
            wells_per_site,
            stratum_index,
            component_index,
            days,
        })
    }

    pub fn strata(&self) -> &[StratumDef] {
        &self.strata
    }

    pub fn components(&self) -> &[ComponentRef] {
        &self.components
    }

    /// Passes in canonical order.
    pub fn passes(&self) -> &[Pass] {
        &self.passes
    }

    pub fn wells_per_site(&self) -> &BTreeMap<String, u32> {
        &self.wells_per_site
    }

    pub fn stratum(&self, name: &str) -> Option<&StratumDef> {
        self.stratum_index.get(name).map(|&i| &self.strata[i])
    }

    pub fn stratum_position(&self, name: &str) -> Option<usize> {
        self.stratum_index.get(name).copied()
    }

    pub fn component_position(&self, id: &str) -> Option<usize> {
        self.component_index.get(id).copied()
    }

    /// Survey days of a component, each with its pass range.
    pub fn component_days(&self, component: usize) -> &[DayBlock] {
        &self.days[component]
    }

    pub fn day_passes(&self, block: &DayBlock) -> &[Pass] {
        &self.passes[block.start..block.end]
    }

    /// Returns a copy with every pass mapped through `f`, keeping the layout.
    pub fn map_passes(&self, f: impl Fn(&Pass) -> Pass) -> Self {
        let mut out = self.clone();
        out.passes = self.passes.iter().map(f).collect();
        out
    }

    /// Distinct facilities per stratum, in stratum order.
    pub fn facilities_per_stratum(&self) -> Vec<BTreeSet<&str>> {
        let mut out = vec![BTreeSet::new(); self.strata.len()];
        for c in &self.components {
            out[self.stratum_index[&c.stratum]].insert(c.facility_id.as_str());
        }
        out
    }
}

fn check_pass_fields(p: &Pass) -> std::result::Result<(), String> {
    if p.detected {
        let (Some(rate), Some(wind), Some(alt)) = (p.measured_rate, p.wind_speed, p.altitude) else {
            return Err("detected pass needs rate, wind and altitude".into());
        };
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(format!("measured rate must be > 0, got {rate}"));
        }
        if !(wind >= 0.0 && wind.is_finite()) {
            return Err(format!("wind speed must be >= 0, got {wind}"));
        }
        if !(alt > 0.0 && alt.is_finite()) {
            return Err(format!("altitude must be > 0, got {alt}"));
        }
    } else if p.measured_rate.is_some() || p.wind_speed.is_some() || p.altitude.is_some() {
        return Err("non-detected pass must leave rate, wind and altitude empty".into());
    }
    Ok(())
}

/// Day and pass counts derived from the pass table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DerivedCounts {
    /// Component id to number of surveyed days.
    pub days_surveyed: BTreeMap<String, u32>,
    /// (component id, day) to number of passes.
    pub passes_per_day: BTreeMap<(String, u32), u32>,
    /// (component id, day) to number of detected passes.
    pub detections_per_day: BTreeMap<(String, u32), u32>,
}

pub fn derive_counts(frame: &SurveyFrame) -> DerivedCounts {
    let mut out = DerivedCounts::default();
    for (ci, c) in frame.components.iter().enumerate() {
        let blocks = frame.component_days(ci);
        out.days_surveyed.insert(c.component_id.clone(), blocks.len() as u32);
        for b in blocks {
            let key = (c.component_id.clone(), b.day);
            let hits = frame.day_passes(b).iter().filter(|p| p.detected).count() as u32;
            out.passes_per_day.insert(key.clone(), b.q_total());
            out.detections_per_day.insert(key, hits);
        }
    }
    out
}

/// Median of passes per component-day (midpoint of the two central values
/// for an even count).
pub fn median_passes_per_day(frame: &SurveyFrame) -> f64 {
    let mut q: Vec<u32> = (0..frame.components.len())
        .flat_map(|ci| frame.component_days(ci).iter().map(|b| b.q_total()))
        .collect();
    q.sort_unstable();
    let n = q.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        q[n / 2] as f64
    } else {
        (q[n / 2 - 1] + q[n / 2]) as f64 / 2.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub single_day_components: Vec<String>,
    pub zero_detection_days: Vec<(String, u32)>,
    pub zero_emitting_strata: Vec<String>,
    pub small_strata: Vec<String>,
    /// (component, day, passes) where passes exceed [`TYPICAL_MAX_PASSES`].
    pub crowded_days: Vec<(String, u32, u32)>,
    /// (stratum, facilities present in the registry, n_sampled) where the
    /// registry lists fewer facilities than were sampled.
    pub unregistered_facilities: Vec<(String, u32, u32)>,
}

impl FrameDiagnostics {
    pub fn is_empty(&self) -> bool {
        self.single_day_components.is_empty()
            && self.zero_detection_days.is_empty()
            && self.zero_emitting_strata.is_empty()
            && self.small_strata.is_empty()
            && self.crowded_days.is_empty()
            && self.unregistered_facilities.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.single_day_components.is_empty() {
            out.push(format!(
                "{} components surveyed on a single day",
                self.single_day_components.len()
            ));
        }
        if !self.zero_detection_days.is_empty() {
            out.push(format!(
                "{} component-days without any detection",
                self.zero_detection_days.len()
            ));
        }
        for s in &self.zero_emitting_strata {
            out.push(format!("stratum {s:?} has no non-zero measurements: stratum treated as zero-emitting"));
        }
        for s in &self.small_strata {
            out.push(format!(
                "stratum {s:?} has fewer than {MIN_STRATUM_SAMPLE} sampled facilities"
            ));
        }
        for (c, d, q) in &self.crowded_days {
            out.push(format!("component {c:?} day {d}: {q} passes"));
        }
        for (s, present, n) in &self.unregistered_facilities {
            out.push(format!(
                "stratum {s:?}: {present} of {n} sampled facilities have registered components; the rest count as zero"
            ));
        }
        out
    }
}

pub fn validate(frame: &SurveyFrame) -> FrameDiagnostics {
    let mut diag = FrameDiagnostics::default();
    let mut stratum_hits = vec![false; frame.strata.len()];
    for (ci, c) in frame.components.iter().enumerate() {
        let blocks = frame.component_days(ci);
        if blocks.len() == 1 {
            diag.single_day_components.push(c.component_id.clone());
        }
        for b in blocks {
            let passes = frame.day_passes(b);
            if passes.iter().any(|p| p.detected) {
                stratum_hits[frame.stratum_index[&c.stratum]] = true;
            } else {
                diag.zero_detection_days.push((c.component_id.clone(), b.day));
            }
            if b.q_total() > TYPICAL_MAX_PASSES {
                diag.crowded_days.push((c.component_id.clone(), b.day, b.q_total()));
            }
        }
    }
    let facilities = frame.facilities_per_stratum();
    for (i, s) in frame.strata.iter().enumerate() {
        if !stratum_hits[i] {
            diag.zero_emitting_strata.push(s.name.clone());
        }
        if s.n_sampled < MIN_STRATUM_SAMPLE {
            diag.small_strata.push(s.name.clone());
        }
        let present = registered_units(frame, i, &facilities[i]);
        if present < s.n_sampled {
            diag.unregistered_facilities.push((s.name.clone(), present, s.n_sampled));
        }
    }
    diag
}

/// Stage I units present in the registry for a stratum. A site of wells
/// counts as its number of wells, since wells are the sampled units there.
fn registered_units(frame: &SurveyFrame, stratum: usize, facilities: &BTreeSet<&str>) -> u32 {
    let name = &frame.strata[stratum].name;
    let mut well_sites = BTreeSet::new();
    let mut other = BTreeSet::new();
    for c in frame.components.iter().filter(|c| &c.stratum == name) {
        if c.is_well {
            well_sites.insert(c.site_id.as_str());
        } else {
            other.insert(c.facility_id.as_str());
        }
    }
    debug_assert!(other.len() <= facilities.len());
    let wells: u32 = well_sites.iter().map(|s| frame.wells_per_site[*s]).sum();
    wells + other.len() as u32
}

// ---------------------------------------------------------------------------
// CSV I/O

pub const PASSES_HEADER: [&str; 10] = [
    "component_id",
    "facility_id",
    "site_id",
    "stratum",
    "day",
    "pass",
    "detected",
    "rate_kg_h",
    "wind_m_s",
    "altitude_m",
];
pub const FRAME_HEADER: [&str; 6] = ["component_id", "facility_id", "site_id", "stratum", "is_well", "wells_at_site"];
pub const STRATA_HEADER: [&str; 3] = ["stratum", "n_sampled", "n_population"];

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if got != header {
        return Err(Error::Parse {
            file: path.to_path_buf(),
            row: 1,
            message: format!("expected header {:?}, got {:?}", header.join(","), got.join(",")),
        });
    }
    Ok(rdr)
}

struct RowCtx<'a> {
    path: &'a Path,
    row: usize,
}

impl RowCtx<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            file: self.path.to_path_buf(),
            row: self.row,
            message: message.into(),
        }
    }

    fn text<'r>(&self, rec: &'r csv::StringRecord, i: usize, name: &str) -> Result<&'r str> {
        match rec.get(i) {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(self.err(format!("missing {name}"))),
        }
    }

    fn int(&self, rec: &csv::StringRecord, i: usize, name: &str) -> Result<u32> {
        let s = self.text(rec, i, name)?;
        s.parse().map_err(|_| self.err(format!("{name}: not a non-negative integer: {s:?}")))
    }

    fn flag(&self, rec: &csv::StringRecord, i: usize, name: &str) -> Result<bool> {
        match self.text(rec, i, name)? {
            "1" | "true" | "TRUE" => Ok(true),
            "0" | "false" | "FALSE" => Ok(false),
            s => Err(self.err(format!("{name}: expected 0 or 1, got {s:?}"))),
        }
    }

    fn opt_float(&self, rec: &csv::StringRecord, i: usize, name: &str) -> Result<Option<f64>> {
        match rec.get(i) {
            None | Some("") => Ok(None),
            Some(s) => {
                let v: f64 = s.parse().map_err(|_| self.err(format!("{name}: not a number: {s:?}")))?;
                if !v.is_finite() {
                    return Err(self.err(format!("{name}: not finite")));
                }
                Ok(Some(v))
            }
        }
    }
}

fn row_of(rec: &csv::StringRecord) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(0)
}

pub fn read_strata(path: &Path) -> Result<Vec<StratumDef>> {
    let mut rdr = open_csv(path, &STRATA_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let ctx = RowCtx { path, row: row_of(&rec) };
        let def = StratumDef {
            name: ctx.text(&rec, 0, "stratum")?.to_owned(),
            n_sampled: ctx.int(&rec, 1, "n_sampled")?,
            n_population: ctx.int(&rec, 2, "n_population")?,
        };
        if def.n_sampled < 1 || def.n_sampled > def.n_population {
            return Err(ctx.err("need 1 <= n_sampled <= n_population"));
        }
        out.push(def);
    }
    Ok(out)
}

pub fn read_components(path: &Path) -> Result<Vec<ComponentRef>> {
    let mut rdr = open_csv(path, &FRAME_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let ctx = RowCtx { path, row: row_of(&rec) };
        let wells_at_site = match rec.get(5) {
            None | Some("") => 0,
            Some(_) => ctx.int(&rec, 5, "wells_at_site")?,
        };
        out.push(ComponentRef {
            component_id: ctx.text(&rec, 0, "component_id")?.to_owned(),
            facility_id: ctx.text(&rec, 1, "facility_id")?.to_owned(),
            site_id: ctx.text(&rec, 2, "site_id")?.to_owned(),
            stratum: ctx.text(&rec, 3, "stratum")?.to_owned(),
            is_well: ctx.flag(&rec, 4, "is_well")?,
            wells_at_site,
        });
    }
    Ok(out)
}

/// Reads pass records and cross-checks the facility, site and stratum
/// columns against `registry`.
pub fn read_passes(path: &Path, registry: &[ComponentRef]) -> Result<Vec<Pass>> {
    let index: HashMap<&str, &ComponentRef> = registry.iter().map(|c| (c.component_id.as_str(), c)).collect();
    let mut rdr = open_csv(path, &PASSES_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let ctx = RowCtx { path, row: row_of(&rec) };
        let component_id = ctx.text(&rec, 0, "component_id")?;
        let Some(c) = index.get(component_id) else {
            return Err(Error::Integrity(format!(
                "{}: row {}: unknown component {component_id:?}",
                path.display(),
                ctx.row
            )));
        };
        let facility = ctx.text(&rec, 1, "facility_id")?;
        let site = ctx.text(&rec, 2, "site_id")?;
        let stratum = ctx.text(&rec, 3, "stratum")?;
        if facility != c.facility_id || site != c.site_id || stratum != c.stratum {
            return Err(Error::Integrity(format!(
                "{}: row {}: facility/site/stratum of {component_id:?} disagree with the component registry",
                path.display(),
                ctx.row
            )));
        }
        let pass = Pass {
            component_id: component_id.to_owned(),
            day: ctx.int(&rec, 4, "day")?,
            pass: ctx.int(&rec, 5, "pass")?,
            detected: ctx.flag(&rec, 6, "detected")?,
            measured_rate: ctx.opt_float(&rec, 7, "rate_kg_h")?,
            wind_speed: ctx.opt_float(&rec, 8, "wind_m_s")?,
            altitude: ctx.opt_float(&rec, 9, "altitude_m")?,
        };
        check_pass_fields(&pass).map_err(|m| ctx.err(m))?;
        out.push(pass);
    }
    Ok(out)
}

pub fn load_survey(passes_path: &Path, frame_path: &Path, strata_path: &Path) -> Result<SurveyFrame> {
    let strata = read_strata(strata_path)?;
    let components = read_components(frame_path)?;
    let passes = read_passes(passes_path, &components)?;
    SurveyFrame::new(strata, components, passes)
}

/// The three file locations of a survey directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyPaths {
    pub passes: std::path::PathBuf,
    pub frame: std::path::PathBuf,
    pub strata: std::path::PathBuf,
}

impl SurveyPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            passes: dir.join("passes.csv"),
            frame: dir.join("frame.csv"),
            strata: dir.join("strata.csv"),
        }
    }

    pub fn load(&self) -> Result<SurveyFrame> {
        load_survey(&self.passes, &self.frame, &self.strata)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes the frame back to `passes.csv`, `frame.csv` and `strata.csv` in
/// `dir`. Floats use the shortest representation that round-trips.
pub fn write_survey(frame: &SurveyFrame, dir: &Path) -> Result<SurveyPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = SurveyPaths::in_dir(dir);

    let mut w = create(&paths.strata)?;
    w.write_record(STRATA_HEADER)?;
    for s in &frame.strata {
        w.write_record([s.name.clone(), s.n_sampled.to_string(), s.n_population.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&paths.strata, e))?;

    let mut w = create(&paths.frame)?;
    w.write_record(FRAME_HEADER)?;
    for c in &frame.components {
        w.write_record([
            c.component_id.as_str(),
            &c.facility_id,
            &c.site_id,
            &c.stratum,
            if c.is_well { "1" } else { "0" },
            &c.wells_at_site.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&paths.frame, e))?;

    let mut w = create(&paths.passes)?;
    w.write_record(PASSES_HEADER)?;
    for p in &frame.passes {
        let c = &frame.components[frame.component_index[&p.component_id]];
        w.write_record([
            p.component_id.clone(),
            c.facility_id.clone(),
            c.site_id.clone(),
            c.stratum.clone(),
            p.day.to_string(),
            p.pass.to_string(),
            if p.detected { "1".into() } else { "0".into() },
            fmt_opt(p.measured_rate),
            fmt_opt(p.wind_speed),
            fmt_opt(p.altitude),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&paths.passes, e))?;
    Ok(paths)
}

/// Writes a `# key: value` comment line followed by CSV content.
pub(crate) fn write_commented(path: &Path, comment: &str, body: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    for line in comment.lines() {
        writeln!(f, "# {line}").map_err(|e| Error::io(path, e))?;
    }
    f.write_all(body).map_err(|e| Error::io(path, e))
}
