//! SCADA dataset I/O: CSV parsing, labeled output, turbine spec handling.
//!
//! Input files are headered CSV with at least `timestamp`, `wind_speed` and
//! `power` columns (matched case-insensitively). Any other columns are kept
//! verbatim and echoed back on output, in their original order. Row order is
//! never changed by any stage of the pipeline.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

/// Per-point classification produced by the cleaning pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// Not yet classified.
    Unlabeled,
    Normal,
    /// Stacked points with positive wind speed and negative power.
    Type1,
    /// Sparse outliers outside the curve's edge region.
    Type2,
    /// Dense abnormal clusters (e.g. curtailment bands) inside the edge
    /// region but outside the extracted normal region.
    Type3,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Unlabeled => "unlabeled",
            Label::Normal => "normal",
            Label::Type1 => "type1",
            Label::Type2 => "type2",
            Label::Type3 => "type3",
        }
    }

    pub fn is_abnormal(self) -> bool {
        matches!(self, Label::Type1 | Label::Type2 | Label::Type3)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unlabeled" => Ok(Label::Unlabeled),
            "normal" => Ok(Label::Normal),
            "type1" => Ok(Label::Type1),
            "type2" => Ok(Label::Type2),
            "type3" => Ok(Label::Type3),
            _ => Err(()),
        }
    }
}

/// One SCADA sample. `extras` holds the values of any non-core input
/// columns, aligned with [`Dataset::extra_headers`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScadaPoint {
    pub timestamp: String,
    /// Wind speed in m/s.
    pub wind_speed: f64,
    /// Active power in kW.
    pub power: f64,
    pub label: Label,
    pub extras: Vec<String>,
}

impl ScadaPoint {
    pub fn new(timestamp: impl Into<String>, wind_speed: f64, power: f64) -> Self {
        ScadaPoint {
            timestamp: timestamp.into(),
            wind_speed,
            power,
            label: Label::Unlabeled,
            extras: Vec::new(),
        }
    }
}

/// Turbine nameplate parameters. Speeds are m/s, power is kW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbineSpec {
    pub cut_in: f64,
    pub rated_speed: f64,
    pub cut_out: f64,
    pub rated_power: f64,
}

impl TurbineSpec {
    pub fn new(cut_in: f64, rated_speed: f64, cut_out: f64, rated_power: f64) -> Self {
        TurbineSpec {
            cut_in,
            rated_speed,
            cut_out,
            rated_power,
        }
    }

    /// Parses a `key = value` file. Keys are `cut_in`, `rated_speed`,
    /// `cut_out` and `rated_power`; blank lines and `#` comments are
    /// ignored.
    pub fn from_key_value(text: &str) -> Result<Self, ScadaError> {
        let mut fields: [Option<f64>; 4] = [None; 4];
        const KEYS: [&str; 4] = ["cut_in", "rated_speed", "cut_out", "rated_power"];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ScadaError::SpecConfig(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_ascii_lowercase();
            let idx = KEYS.iter().position(|k| *k == key).ok_or_else(|| {
                ScadaError::SpecConfig(format!("line {}: unknown key `{}`", lineno + 1, key))
            })?;
            let parsed: f64 = value.trim().parse().map_err(|_| {
                ScadaError::SpecConfig(format!(
                    "line {}: `{}` is not a number",
                    lineno + 1,
                    value.trim()
                ))
            })?;
            fields[idx] = Some(parsed);
        }
        let missing: Vec<&str> = KEYS
            .iter()
            .zip(&fields)
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| *k)
            .collect();
        if !missing.is_empty() {
            return Err(ScadaError::SpecConfig(format!(
                "missing keys: {}",
                missing.join(", ")
            )));
        }
        Ok(TurbineSpec {
            cut_in: fields[0].unwrap(),
            rated_speed: fields[1].unwrap(),
            cut_out: fields[2].unwrap(),
            rated_power: fields[3].unwrap(),
        })
    }
}

/// Checks the physical ordering constraints on a turbine spec. Returns one
/// human-readable violation per broken constraint; an empty vector means the
/// spec is usable. Comparisons are written so that NaN fails them.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_spec(spec: &TurbineSpec) -> Vec<String> {
    let mut violations = Vec::new();
    if !(spec.cut_in > 0.0) {
        violations.push(format!("cut_in must be positive, got {}", spec.cut_in));
    }
    if !(spec.cut_in < spec.rated_speed) {
        violations.push(format!(
            "cut_in ({}) must be below rated_speed ({})",
            spec.cut_in, spec.rated_speed
        ));
    }
    if !(spec.rated_speed < spec.cut_out) {
        violations.push(format!(
            "rated_speed ({}) must be below cut_out ({})",
            spec.rated_speed, spec.cut_out
        ));
    }
    if !(spec.rated_power > 0.0) {
        violations.push(format!(
            "rated_power must be positive, got {}",
            spec.rated_power
        ));
    }
    violations
}

const CORE_TIMESTAMP: &str = "timestamp";
const CORE_WIND_SPEED: &str = "wind_speed";
const CORE_POWER: &str = "power";
const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, Copy)]
struct CoreColumns {
    timestamp: usize,
    wind_speed: usize,
    power: usize,
    label: Option<usize>,
}

/// A parsed SCADA dataset: the points, the turbine spec they belong to, and
/// enough header bookkeeping to write output with the input's column order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: TurbineSpec,
    pub source_id: String,
    pub points: Vec<ScadaPoint>,
    headers: Vec<String>,
    core: CoreColumns,
}

impl Dataset {
    /// Builds a dataset with the canonical `timestamp,wind_speed,power`
    /// header. Points must not carry extras.
    pub fn new(spec: TurbineSpec, source_id: impl Into<String>, points: Vec<ScadaPoint>) -> Self {
        debug_assert!(points.iter().all(|p| p.extras.is_empty()));
        Dataset {
            spec,
            source_id: source_id.into(),
            points,
            headers: vec![
                CORE_TIMESTAMP.to_string(),
                CORE_WIND_SPEED.to_string(),
                CORE_POWER.to_string(),
            ],
            core: CoreColumns {
                timestamp: 0,
                wind_speed: 1,
                power: 2,
                label: None,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Names of the non-core columns, in output order.
    pub fn extra_headers(&self) -> Vec<&str> {
        self.headers
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.is_core_column(*i))
            .map(|(_, h)| h.as_str())
            .collect()
    }

    /// Appends a new extra column. `values` must have one entry per point.
    pub fn push_extra_column(&mut self, name: impl Into<String>, values: Vec<String>) {
        assert_eq!(
            values.len(),
            self.points.len(),
            "one value per point required"
        );
        self.headers.push(name.into());
        for (point, value) in self.points.iter_mut().zip(values) {
            point.extras.push(value);
        }
    }

    /// Position of a named extra column among `extra_headers`, if present.
    pub fn extra_column(&self, name: &str) -> Option<usize> {
        self.extra_headers()
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
    }

    fn is_core_column(&self, idx: usize) -> bool {
        idx == self.core.timestamp
            || idx == self.core.wind_speed
            || idx == self.core.power
            || Some(idx) == self.core.label
    }

    fn output_headers(&self, with_label: bool) -> Vec<String> {
        let mut out = self.headers.clone();
        if with_label && self.core.label.is_none() {
            out.push(LABEL_COLUMN.to_string());
        }
        out
    }

    fn output_row(&self, point: &ScadaPoint, with_label: bool) -> Vec<String> {
        let mut row = Vec::with_capacity(self.headers.len() + 1);
        let mut extras = point.extras.iter();
        for idx in 0..self.headers.len() {
            if idx == self.core.timestamp {
                row.push(point.timestamp.clone());
            } else if idx == self.core.wind_speed {
                row.push(point.wind_speed.to_string());
            } else if idx == self.core.power {
                row.push(point.power.to_string());
            } else if Some(idx) == self.core.label {
                row.push(point.label.to_string());
            } else {
                row.push(extras.next().cloned().unwrap_or_default());
            }
        }
        if with_label && self.core.label.is_none() {
            row.push(point.label.to_string());
        }
        row
    }
}

#[derive(Debug, Error)]
pub enum ScadaError {
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}: invalid numeric value `{value}` in column `{column}`")]
    NonNumericField {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: invalid label `{value}`")]
    InvalidLabel { row: usize, value: String },
    #[error("dataset contains no data rows")]
    EmptyDataset,
    #[error("row {row}: point is unlabeled; run the pipeline before writing labeled output")]
    UnlabeledPoint { row: usize },
    #[error("turbine spec: {0}")]
    SpecConfig(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses a headered SCADA CSV. Core columns are matched case-insensitively
/// after trimming; a UTF-8 BOM on the first header is ignored. An existing
/// `label` column is parsed into point labels rather than kept as an extra.
pub fn parse_dataset<R: Read>(
    reader: R,
    spec: TurbineSpec,
    source_id: impl Into<String>,
) -> Result<Dataset, ScadaError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::Headers)
        .from_reader(reader);
    let headers: Vec<String> = {
        let raw = csv_reader.headers()?;
        raw.iter()
            .enumerate()
            .map(|(i, h)| {
                if i == 0 {
                    h.trim_start_matches('\u{feff}')
                } else {
                    h
                }
                .to_string()
            })
            .collect()
    };

    let find = |name: &'static str| -> Option<usize> {
        headers.iter().position(|h| h.eq_ignore_ascii_case(name))
    };
    let core = CoreColumns {
        timestamp: find(CORE_TIMESTAMP).ok_or(ScadaError::MissingColumn(CORE_TIMESTAMP))?,
        wind_speed: find(CORE_WIND_SPEED).ok_or(ScadaError::MissingColumn(CORE_WIND_SPEED))?,
        power: find(CORE_POWER).ok_or(ScadaError::MissingColumn(CORE_POWER))?,
        label: find(LABEL_COLUMN),
    };

    let parse_field = |row: usize, column: &str, value: &str| -> Result<f64, ScadaError> {
        let parsed: Result<f64, _> = value.trim().parse();
        match parsed {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(ScadaError::NonNumericField {
                row,
                column: column.to_string(),
                value: value.to_string(),
            }),
        }
    };

    let mut points = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let wind_speed = parse_field(row, CORE_WIND_SPEED, &record[core.wind_speed])?;
        let power = parse_field(row, CORE_POWER, &record[core.power])?;
        let label = match core.label {
            Some(idx) => record[idx].parse().map_err(|_| ScadaError::InvalidLabel {
                row,
                value: record[idx].to_string(),
            })?,
            None => Label::Unlabeled,
        };
        let extras = record
            .iter()
            .enumerate()
            .filter(|(j, _)| {
                *j != core.timestamp
                    && *j != core.wind_speed
                    && *j != core.power
                    && Some(*j) != core.label
            })
            .map(|(_, v)| v.to_string())
            .collect();
        points.push(ScadaPoint {
            timestamp: record[core.timestamp].trim().to_string(),
            wind_speed,
            power,
            label,
            extras,
        });
    }
    if points.is_empty() {
        return Err(ScadaError::EmptyDataset);
    }
    Ok(Dataset {
        spec,
        source_id: source_id.into(),
        points,
        headers,
        core,
    })
}

fn write_rows<W: Write>(dataset: &Dataset, sink: W, with_label: bool) -> Result<usize, ScadaError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(dataset.output_headers(with_label))?;
    for point in &dataset.points {
        writer.write_record(dataset.output_row(point, with_label))?;
    }
    writer.flush()?;
    Ok(dataset.points.len())
}

/// Writes the dataset with a `label` column. Every point must already be
/// labeled. Floats are written with Rust's shortest round-trip formatting,
/// so re-parsing reproduces the exact values. Returns the row count.
pub fn write_labeled<W: Write>(dataset: &Dataset, sink: W) -> Result<usize, ScadaError> {
    if let Some(i) = dataset
        .points
        .iter()
        .position(|p| p.label == Label::Unlabeled)
    {
        return Err(ScadaError::UnlabeledPoint { row: i + 1 });
    }
    write_rows(dataset, sink, true)
}

/// Writes the dataset without requiring (or appending) labels; used for raw
/// and synthetic data. Returns the row count.
pub fn write_dataset<W: Write>(dataset: &Dataset, sink: W) -> Result<usize, ScadaError> {
    write_rows(dataset, sink, false)
}
