//! CSV ingestion of count or composition tables.

use std::collections::BTreeSet;
use std::path::Path;

use ckdr::json::format_f64;
use ckdr::simplex::validate_composition;
use nalgebra::DMatrix;

use crate::error::{CliError, Result};

/// Tolerance on the unit row sum when rows are taken as compositions as is.
pub const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseKind {
    Real,
    /// Values in {−1, +1}.
    Binary,
    /// No response column; `y` is empty.
    Absent,
}

/// Label to class assignments. When only one sign is assigned, the single
/// remaining label takes the other sign.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BinaryMap {
    pub entries: Vec<(String, i8)>,
}

impl BinaryMap {
    /// Parses `label=±1` pairs separated by commas, e.g. `CD=1,healthy=-1`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (label, value) = item
                .rsplit_once('=')
                .ok_or_else(|| CliError::Usage(format!("binary map entry `{item}` is not label=sign")))?;
            let sign = match value.trim() {
                "1" | "+1" => 1,
                "-1" => -1,
                other => return Err(CliError::Usage(format!("binary map value `{other}` must be 1 or -1"))),
            };
            if entries.iter().any(|(l, _): &(String, i8)| l == label.trim()) {
                return Err(CliError::Usage(format!("binary map lists `{}` twice", label.trim())));
            }
            entries.push((label.trim().to_string(), sign));
        }
        if entries.is_empty() {
            return Err(CliError::Usage("binary map is empty".into()));
        }
        Ok(BinaryMap { entries })
    }

    fn lookup(&self, label: &str) -> Option<i8> {
        self.entries.iter().find(|(l, _)| l == label).map(|&(_, s)| s)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOptions {
    pub normalize: bool,
    pub min_prevalence: usize,
    pub binary_map: Option<BinaryMap>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n × d`, rows are compositions.
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub features: Vec<String>,
    pub response_name: String,
    pub kind: ResponseKind,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }
}

/// Reads a table with a required response column.
pub fn ingest_csv(path: &Path, response_column: &str, options: &IngestOptions) -> Result<Dataset> {
    read(path, response_column, options, true)
}

/// Like [`ingest_csv`], but a missing response column yields
/// [`ResponseKind::Absent`].
pub fn ingest_csv_lenient(path: &Path, response_column: &str, options: &IngestOptions) -> Result<Dataset> {
    read(path, response_column, options, false)
}

fn read(path: &Path, response_column: &str, options: &IngestOptions, required: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let response_at = header.iter().position(|h| h == response_column);
    if required && response_at.is_none() {
        return Err(CliError::MissingResponse(response_column.to_string()));
    }
    let feature_at: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != response_at).collect();

    let mut counts: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let mut values = Vec::with_capacity(feature_at.len());
        for &c in &feature_at {
            let text = record.get(c).unwrap_or("");
            let value: f64 = text.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| CliError::NotNumeric {
                row,
                column: header[c].clone(),
                text: text.to_string(),
            })?;
            if value < 0.0 {
                return Err(CliError::NegativeCount { row, column: header[c].clone(), value });
            }
            values.push(value);
        }
        counts.push(values);
        if let Some(c) = response_at {
            labels.push(record.get(c).unwrap_or("").to_string());
        }
    }
    if counts.is_empty() {
        return Err(ckdr::Error::EmptyInput.into());
    }

    // prevalence filter precedes normalization
    let keep: Vec<usize> = (0..feature_at.len())
        .filter(|&j| counts.iter().filter(|row| row[j] > 0.0).count() >= options.min_prevalence)
        .collect();
    if keep.len() < 3 {
        return Err(CliError::TooFewFeatures(keep.len()));
    }
    let features: Vec<String> = keep.iter().map(|&j| header[feature_at[j]].clone()).collect();

    let n = counts.len();
    let mut x = DMatrix::zeros(n, keep.len());
    for (i, row) in counts.iter().enumerate() {
        let kept: Vec<f64> = keep.iter().map(|&j| row[j]).collect();
        let comp = if options.normalize {
            if kept.iter().sum::<f64>() <= 0.0 {
                return Err(CliError::RowSumZero(i + 1));
            }
            validate_composition(&kept, SUM_TOL, true)?
        } else {
            validate_composition(&kept, SUM_TOL, false)?
        };
        for (j, &v) in comp.as_slice().iter().enumerate() {
            x[(i, j)] = v;
        }
    }

    let (y, kind) = match response_at {
        None => (Vec::new(), ResponseKind::Absent),
        Some(_) => parse_responses(&labels, options.binary_map.as_ref())?,
    };
    Ok(Dataset {
        x,
        y,
        features,
        response_name: response_column.to_string(),
        kind,
    })
}

fn parse_responses(labels: &[String], map: Option<&BinaryMap>) -> Result<(Vec<f64>, ResponseKind)> {
    let Some(map) = map else {
        let y = labels
            .iter()
            .enumerate()
            .map(|(r, l)| {
                l.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::UnmappableLabel {
                    row: r + 1,
                    label: l.clone(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let kind = if y.iter().all(|&v| v == 1.0 || v == -1.0) { ResponseKind::Binary } else { ResponseKind::Real };
        return Ok((y, kind));
    };
    let signs: BTreeSet<i8> = map.entries.iter().map(|&(_, s)| s).collect();
    let unmapped: BTreeSet<&str> = labels.iter().map(String::as_str).filter(|l| map.lookup(l).is_none()).collect();
    let fallback = match (signs.len(), unmapped.len()) {
        (1, 1) => Some(-signs.iter().next().copied().unwrap_or(1)),
        _ => None,
    };
    let y = labels
        .iter()
        .enumerate()
        .map(|(r, l)| {
            map.lookup(l).or(fallback).map(f64::from).ok_or_else(|| CliError::UnmappableLabel {
                row: r + 1,
                label: l.clone(),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((y, ResponseKind::Binary))
}

/// Writes the response column (when present) followed by the features,
/// every float with 17 significant digits.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let with_y = data.kind != ResponseKind::Absent;
    let mut header: Vec<&str> = Vec::new();
    if with_y {
        header.push(&data.response_name);
    }
    header.extend(data.features.iter().map(String::as_str));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = Vec::with_capacity(data.d() + 1);
        if with_y {
            rec.push(format_f64(data.y[i]));
        }
        rec.extend(data.x.row(i).iter().map(|&v| format_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
