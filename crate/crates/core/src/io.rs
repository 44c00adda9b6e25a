//! Survey CSV ingestion and writing, run configuration files and truth
//! specification files.
//!
//! # Survey CSV
//!
//! A header row names the columns `q1..qk`, `overall` and `period`, in any
//! order. Score cells hold either integer levels `0..=10`, integer
//! percentages `0..=100` in steps of 10, or decimals already on the unit
//! interval (any cell containing a `.`). A file whose integer score cells
//! include a value above 10 is read as percentages throughout.
//!
//! Levels map to the unit interval by the chosen [`ScaleMapping`]; decimals
//! are taken as they are. Rows whose response lands on 0 or 1 are handled by
//! the [`BoundaryPolicy`]. Attribute scores of 0 or 1 are kept unchanged.
//!
//! # Key/value files
//!
//! Configuration and truth files are flat `key = value` lines. Blank lines
//! and lines starting with `#` are ignored.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Dataset, Period, WeightVector};
use crate::sampler::SamplerConfig;
use crate::synth::{Truth, XLaw};

/// How an ordinal level `l` in `0..=10` becomes a unit-interval score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScaleMapping {
    /// `l / 10`.
    #[default]
    Endpoint,
    /// `(l + 0.5) / 11`, the centre of the level's slot.
    Midpoint,
}

impl ScaleMapping {
    pub fn map(self, level: u8) -> f64 {
        match self {
            ScaleMapping::Endpoint => level as f64 / 10.0,
            ScaleMapping::Midpoint => ((level as f64 + 0.5) / 11.0).min(1.0),
        }
    }

    /// The level whose mapped value is exactly `value`, if any.
    pub fn level_of(self, value: f64) -> Option<u8> {
        (0..=10).find(|&l| self.map(l) == value)
    }
}

impl FromStr for ScaleMapping {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "endpoint" => Ok(ScaleMapping::Endpoint),
            "midpoint" => Ok(ScaleMapping::Midpoint),
            other => Err(Error::invalid(format!(
                "unknown scale mapping '{other}' (expected endpoint or midpoint)"
            ))),
        }
    }
}

impl fmt::Display for ScaleMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleMapping::Endpoint => "endpoint",
            ScaleMapping::Midpoint => "midpoint",
        })
    }
}

/// Treatment of rows whose response maps to 0 or 1.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum BoundaryPolicy {
    #[default]
    Drop,
    /// Move the response to `eps` or `1 - eps`, with `eps` in `(0, 0.05]`.
    Clamp(f64),
}

pub const MAX_CLAMP_EPS: f64 = 0.05;

impl BoundaryPolicy {
    pub fn validate(self) -> Result<()> {
        match self {
            BoundaryPolicy::Clamp(eps) if !(eps > 0.0 && eps <= MAX_CLAMP_EPS) => Err(
                Error::invalid(format!("clamp epsilon {eps} is not in (0, {MAX_CLAMP_EPS}]")),
            ),
            _ => Ok(()),
        }
    }
}

impl FromStr for BoundaryPolicy {
    type Err = Error;
    /// Accepts `drop`, `clamp(eps)` and `clamp:eps`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "drop" {
            return Ok(BoundaryPolicy::Drop);
        }
        let eps = s
            .strip_prefix("clamp(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("clamp:"))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown boundary policy '{s}' (expected drop or clamp(eps))"
                ))
            })?;
        let eps: f64 = eps
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("clamp epsilon '{eps}' is not a number")))?;
        let policy = BoundaryPolicy::Clamp(eps);
        policy.validate()?;
        Ok(policy)
    }
}

impl fmt::Display for BoundaryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryPolicy::Drop => f.write_str("drop"),
            BoundaryPolicy::Clamp(eps) => write!(f, "clamp({eps})"),
        }
    }
}

/// Scale the integer score cells of a file were read on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellScale {
    Levels,
    Percent,
}

/// What ingestion did to the rows of a file. Row numbers count data rows
/// from 1, excluding the header.
#[derive(Clone, Debug, PartialEq)]
pub struct IngestionReport {
    pub rows_read: usize,
    pub dropped_rows: Vec<usize>,
    pub clamped_rows: Vec<usize>,
    pub scale: CellScale,
}

impl IngestionReport {
    pub fn dropped(&self) -> usize {
        self.dropped_rows.len()
    }
}

/// A score cell before mapping.
#[derive(Clone, Copy)]
enum Cell {
    Integer(u32),
    Unit(f64),
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<Cell> {
    let bad = |message: String| Error::Parse {
        row,
        column: column.to_string(),
        message,
    };
    let s = raw.trim();
    if s.contains('.') {
        let v: f64 = s
            .parse()
            .map_err(|_| bad(format!("'{s}' is not a number")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(bad(format!("decimal score {v} is outside [0, 1]")));
        }
        return Ok(Cell::Unit(v));
    }
    let v: u32 = s
        .parse()
        .map_err(|_| bad(format!("'{s}' is not a level or percentage")))?;
    if v > 100 {
        return Err(bad(format!("score {v} exceeds 100")));
    }
    Ok(Cell::Integer(v))
}

struct Columns {
    q: Vec<usize>,
    overall: usize,
    period: usize,
}

fn locate_columns(header: &csv::StringRecord) -> Result<Columns> {
    let mut q: Vec<(usize, usize)> = Vec::new();
    let (mut overall, mut period) = (None, None);
    for (pos, name) in header.iter().enumerate() {
        let name = name.trim();
        let slot = match name {
            "overall" => &mut overall,
            "period" => &mut period,
            _ => {
                let idx = name
                    .strip_prefix('q')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&d| d >= 1)
                    .ok_or_else(|| Error::Schema(format!("unexpected column '{name}'")))?;
                q.push((idx, pos));
                continue;
            }
        };
        if slot.replace(pos).is_some() {
            return Err(Error::Schema(format!("column '{name}' appears twice")));
        }
    }
    let overall = overall.ok_or_else(|| Error::Schema("missing column 'overall'".into()))?;
    let period = period.ok_or_else(|| Error::Schema("missing column 'period'".into()))?;
    if q.is_empty() {
        return Err(Error::Schema("no attribute columns q1..qk".into()));
    }
    q.sort_unstable();
    for (expected, &(idx, _)) in q.iter().enumerate() {
        if idx != expected + 1 {
            return Err(Error::Schema(format!(
                "attribute columns must be q1..q{}, found q{idx} out of place",
                q.len()
            )));
        }
    }
    Ok(Columns {
        q: q.into_iter().map(|(_, pos)| pos).collect(),
        overall,
        period,
    })
}

/// Reads a survey CSV file. See the module documentation for the format.
pub fn load_survey_csv(
    path: &Path,
    mapping: ScaleMapping,
    policy: BoundaryPolicy,
) -> Result<(Dataset, IngestionReport)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_survey_csv(&text, mapping, policy)
}

/// [`load_survey_csv`] on text already in memory.
pub fn parse_survey_csv(
    text: &str,
    mapping: ScaleMapping,
    policy: BoundaryPolicy,
) -> Result<(Dataset, IngestionReport)> {
    policy.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .clone();
    let cols = locate_columns(&header)?;
    let k = cols.q.len();
    let name = |pos: usize| header.get(pos).unwrap_or("").trim().to_string();

    // first pass: cells as written
    let mut raw_rows: Vec<(Vec<Cell>, Cell, Period)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let get = |pos: usize| -> Result<&str> {
            record.get(pos).ok_or_else(|| Error::Parse {
                row,
                column: name(pos),
                message: "missing cell".into(),
            })
        };
        let x = cols
            .q
            .iter()
            .map(|&pos| parse_cell(get(pos)?, row, &name(pos)))
            .collect::<Result<Vec<_>>>()?;
        let y = parse_cell(get(cols.overall)?, row, "overall")?;
        let period = match get(cols.period)? {
            "1" => 1,
            "2" => 2,
            other => {
                return Err(Error::Parse {
                    row,
                    column: "period".into(),
                    message: format!("period '{other}' is not 1 or 2"),
                })
            }
        };
        raw_rows.push((x, y, period));
    }

    let scale = if raw_rows
        .iter()
        .flat_map(|(x, y, _)| x.iter().chain(std::iter::once(y)))
        .any(|c| matches!(c, Cell::Integer(v) if *v > 10))
    {
        CellScale::Percent
    } else {
        CellScale::Levels
    };

    let to_unit = |cell: Cell, row: usize, column: &str| -> Result<f64> {
        match (cell, scale) {
            (Cell::Unit(v), _) => Ok(v),
            (Cell::Integer(v), CellScale::Levels) => Ok(mapping.map(v as u8)),
            (Cell::Integer(v), CellScale::Percent) if v % 10 == 0 => Ok(mapping.map((v / 10) as u8)),
            (Cell::Integer(v), CellScale::Percent) => Err(Error::Parse {
                row,
                column: column.to_string(),
                message: format!("percentage {v} is not a multiple of 10"),
            }),
        }
    };

    let mut x = Vec::with_capacity(raw_rows.len() * k);
    let mut y = Vec::with_capacity(raw_rows.len());
    let mut period = Vec::with_capacity(raw_rows.len());
    let mut report = IngestionReport {
        rows_read: raw_rows.len(),
        dropped_rows: Vec::new(),
        clamped_rows: Vec::new(),
        scale,
    };
    for (i, (xr, yr, p)) in raw_rows.into_iter().enumerate() {
        let row = i + 1;
        let mut xs = Vec::with_capacity(k);
        for (cell, &pos) in xr.into_iter().zip(&cols.q) {
            xs.push(to_unit(cell, row, &name(pos))?);
        }
        let mut yv = to_unit(yr, row, "overall")?;
        if yv <= 0.0 || yv >= 1.0 {
            match policy {
                BoundaryPolicy::Drop => {
                    report.dropped_rows.push(row);
                    continue;
                }
                BoundaryPolicy::Clamp(eps) => {
                    yv = if yv <= 0.0 { eps } else { 1.0 - eps };
                    report.clamped_rows.push(row);
                }
            }
        }
        x.extend(xs);
        y.push(yv);
        period.push(p);
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "all {} rows were dropped or the file has no data rows",
            report.rows_read
        )));
    }
    Ok((Dataset::from_flat(k, x, y, period)?, report))
}

/// A score cell as written by [`write_survey_csv`]: the endpoint level when
/// the value is one exactly, otherwise the shortest decimal that reads back
/// to the same value.
fn format_score(v: f64) -> String {
    match ScaleMapping::Endpoint.level_of(v) {
        Some(level) => level.to_string(),
        None => {
            let s = format!("{v}");
            if s.contains('.') {
                s
            } else {
                format!("{s}.0")
            }
        }
    }
}

/// Survey CSV text for `data`. Reading it back with the endpoint mapping
/// reproduces the dataset exactly.
pub fn survey_csv_string(data: &Dataset) -> String {
    let k = data.k();
    let mut out = String::new();
    let header: Vec<String> = (1..=k)
        .map(|j| format!("q{j}"))
        .chain(["overall".to_string(), "period".to_string()])
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in data.rows().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|&v| format_score(v)).collect();
        cells.push(format_score(data.y()[i]));
        cells.push(data.periods()[i].to_string());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_survey_csv(path: &Path, data: &Dataset) -> Result<()> {
    write_text(path, &survey_csv_string(data))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses `key = value` lines into ordered pairs. Line numbers in errors
/// count from 1.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            row: i + 1,
            column: String::new(),
            message: format!("expected 'key = value', found '{line}'"),
        })?;
        out.push((i + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Line 0 marks a value given directly rather than read from a file.
fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        if line == 0 {
            Error::invalid(format!("{key}: invalid value '{value}'"))
        } else {
            Error::Parse {
                row: line,
                column: key.to_string(),
                message: format!("invalid value '{value}'"),
            }
        }
    })
}

/// Keys of `provenance.txt` that are not configuration settings.
pub const PROVENANCE_KEYS: [&str; 4] = ["config_hash", "version", "input_sha256", "timestamp"];

/// Which model a fit runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ModelChoice {
    #[default]
    Joint,
    /// One independent fit per period.
    Separated,
}

impl FromStr for ModelChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "joint" => Ok(ModelChoice::Joint),
            "separated" => Ok(ModelChoice::Separated),
            other => Err(Error::invalid(format!(
                "unknown model kind '{other}' (expected joint or separated)"
            ))),
        }
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelChoice::Joint => "joint",
            ModelChoice::Separated => "separated",
        })
    }
}

/// Everything a fit needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub model_kind: ModelChoice,
    pub sampler: SamplerConfig,
    pub scale_mapping: ScaleMapping,
    pub boundary_policy: BoundaryPolicy,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_path: PathBuf::new(),
            model_kind: ModelChoice::default(),
            sampler: SamplerConfig::default(),
            scale_mapping: ScaleMapping::default(),
            boundary_policy: BoundaryPolicy::default(),
            output_dir: PathBuf::from("."),
            emit_plots: false,
        }
    }
}

impl RunConfig {
    /// Sets one field from its key and textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_at(0, key, value)
    }

    fn set_at(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let s = &mut self.sampler;
        match key {
            "input_path" => self.input_path = PathBuf::from(value),
            "model_kind" => self.model_kind = value.parse()?,
            "iterations" => s.iterations = parse_value(line, key, value)?,
            "burnin" => s.burnin = parse_value(line, key, value)?,
            "thin" => s.thin = parse_value(line, key, value)?,
            "seed" => s.seed = parse_value(line, key, value)?,
            "target_acceptance" => s.target_acceptance = parse_value(line, key, value)?,
            "target_acceptance_weights" => {
                s.target_acceptance_weights = parse_value(line, key, value)?
            }
            "adapt_during_burnin" => s.adapt_during_burnin = parse_value(line, key, value)?,
            "scale_mapping" => self.scale_mapping = value.parse()?,
            "boundary_policy" => self.boundary_policy = value.parse()?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "emit_plots" => self.emit_plots = parse_value(line, key, value)?,
            other if line == 0 => {
                return Err(Error::invalid(format!("unknown configuration key '{other}'")))
            }
            other => {
                return Err(Error::Parse {
                    row: line,
                    column: other.to_string(),
                    message: "unknown configuration key".into(),
                })
            }
        }
        Ok(())
    }

    /// Applies a `key = value` configuration text on top of `self`. The
    /// extra keys of a `provenance.txt` are skipped, so a run's provenance
    /// file can serve as the configuration of a rerun.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line, key, value) in parse_key_values(text)? {
            if PROVENANCE_KEYS.contains(&key.as_str()) {
                continue;
            }
            self.set_at(line, &key, &value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.boundary_policy.validate()?;
        if self.input_path.as_os_str().is_empty() {
            return Err(Error::invalid("input_path is not set"));
        }
        Ok(())
    }

    /// Settings that determine the results, one `key = value` per line in a
    /// fixed order. The output directory is not among them.
    pub fn canonical_lines(&self) -> Vec<String> {
        let s = &self.sampler;
        vec![
            format!("input_path = {}", self.input_path.display()),
            format!("model_kind = {}", self.model_kind),
            format!("iterations = {}", s.iterations),
            format!("burnin = {}", s.burnin),
            format!("thin = {}", s.thin),
            format!("seed = {}", s.seed),
            format!("target_acceptance = {}", s.target_acceptance),
            format!("target_acceptance_weights = {}", s.target_acceptance_weights),
            format!("adapt_during_burnin = {}", s.adapt_during_burnin),
            format!("scale_mapping = {}", self.scale_mapping),
            format!("boundary_policy = {}", self.boundary_policy),
            format!("emit_plots = {}", self.emit_plots),
        ]
    }
}

fn parse_weights(line: usize, key: &str, value: &str) -> Result<WeightVector> {
    let w = value
        .split(',')
        .map(|v| parse_value::<f64>(line, key, v.trim()))
        .collect::<Result<Vec<_>>>()?;
    WeightVector::new(w)
}

fn parse_x_law(line: usize, value: &str) -> Result<XLaw> {
    let inner = |prefix: &str| {
        value
            .strip_prefix(prefix)
            .and_then(|r| r.strip_prefix('('))
            .and_then(|r| r.strip_suffix(')'))
    };
    if value == "continuous" {
        Ok(XLaw::Continuous)
    } else if let Some(levels) = inner("ordinal") {
        Ok(XLaw::Ordinal {
            levels: parse_value(line, "x_law", levels.trim())?,
        })
    } else if let Some(v) = inner("constant") {
        Ok(XLaw::Constant(parse_value(line, "x_law", v.trim())?))
    } else {
        Err(Error::Parse {
            row: line,
            column: "x_law".into(),
            message: format!(
                "'{value}' is not ordinal(levels), continuous or constant(value)"
            ),
        })
    }
}

fn format_x_law(law: XLaw) -> String {
    match law {
        XLaw::Ordinal { levels } => format!("ordinal({levels})"),
        XLaw::Continuous => "continuous".into(),
        XLaw::Constant(v) => format!("constant({v})"),
    }
}

fn format_weights(w: &WeightVector) -> String {
    w.as_slice()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Parses a truth specification:
///
/// ```text
/// weights = 0.3, 0.2, 0.15, 0.1, 0.05, 0.2
/// weights_period2 = ...        # optional
/// sigma2 = 0.005
/// n_per_group = 200
/// periods = 2                  # default 2
/// x_law = ordinal(11)          # or continuous, constant(v)
/// ```
///
/// The last weight belongs to the latent score.
pub fn parse_truth(text: &str) -> Result<Truth> {
    let (mut weights, mut weights2, mut sigma2, mut n) = (None, None, None, None);
    let mut periods = 2u8;
    let mut x_law = XLaw::default();
    for (line, key, value) in parse_key_values(text)? {
        match key.as_str() {
            "weights" => weights = Some(parse_weights(line, &key, &value)?),
            "weights_period2" => weights2 = Some(parse_weights(line, &key, &value)?),
            "sigma2" => sigma2 = Some(parse_value(line, &key, &value)?),
            "n_per_group" => n = Some(parse_value(line, &key, &value)?),
            "periods" => periods = parse_value(line, &key, &value)?,
            "x_law" => x_law = parse_x_law(line, &value)?,
            other => {
                return Err(Error::Parse {
                    row: line,
                    column: other.to_string(),
                    message: "unknown truth key".into(),
                })
            }
        }
    }
    let missing = |k: &str| Error::Schema(format!("truth file lacks '{k}'"));
    let mut truth = Truth::new(
        weights.ok_or_else(|| missing("weights"))?,
        sigma2.ok_or_else(|| missing("sigma2"))?,
        n.ok_or_else(|| missing("n_per_group"))?,
        periods,
    );
    truth.weights_period2 = weights2;
    truth.x_law = x_law;
    truth.validate()?;
    Ok(truth)
}

pub fn load_truth(path: &Path) -> Result<Truth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_truth(&text)
}

/// The text [`parse_truth`] reads back to `truth`.
pub fn truth_string(truth: &Truth) -> String {
    let mut out = format!("weights = {}\n", format_weights(&truth.weights));
    if let Some(w2) = &truth.weights_period2 {
        out.push_str(&format!("weights_period2 = {}\n", format_weights(w2)));
    }
    out.push_str(&format!("sigma2 = {}\n", truth.sigma2));
    out.push_str(&format!("n_per_group = {}\n", truth.n_per_group));
    out.push_str(&format!("periods = {}\n", truth.periods));
    out.push_str(&format!("x_law = {}\n", format_x_law(truth.x_law)));
    out
}
