//! File formats: counts and model CSVs, builtin model specs, raw draw
//! streams, and plot-data series.
//!
//! Counts files have the header `label,count`; model files `label,prob`.
//! Files are UTF-8, comma separated, with base-10 integers and no
//! thousands separators. Diagnostics carry one-based line numbers.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::distributions::{
    make_uniform, poisson_model, BinDistribution, EmpiricalCounts, HardyWeinberg,
    SparseUniformModel, DEFAULT_TAIL_TOLERANCE,
};
use crate::error::{GofError, Result};
use crate::montecarlo::Model;
use crate::numeric::CompensatedSum;
use crate::orderings::TrialResult;

fn parse_err(line: usize, message: impl Into<String>) -> GofError {
    GofError::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a two-column CSV with the given header, returning `(line, label,
/// value)` rows.
fn read_two_columns(text: &str, value_name: &str) -> Result<Vec<(usize, String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields != ["label", value_name] {
        return Err(parse_err(
            1,
            format!(
                "expected header 'label,{value_name}', found '{}'",
                fields.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != 2 {
            return Err(parse_err(
                line,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        rows.push((
            line,
            record[0].trim().to_string(),
            record[1].trim().to_string(),
        ));
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    Ok(rows)
}

/// One row of a counts file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountRow {
    pub line: usize,
    pub label: String,
    pub count: u64,
}

fn parse_count(line: usize, s: &str) -> Result<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(parse_err(
            line,
            format!("count '{s}' is not a base-10 nonnegative integer"),
        ));
    }
    s.parse()
        .map_err(|_| parse_err(line, format!("count '{s}' is out of range")))
}

/// Parses a `label,count` file.
pub fn parse_counts_csv(text: &str) -> Result<Vec<CountRow>> {
    let rows = read_two_columns(text, "count")?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, label, value) in rows {
        if let Some(prev) = out.iter().find(|r: &&CountRow| r.label == label) {
            return Err(parse_err(
                line,
                format!("label '{label}' already appeared on line {}", prev.line),
            ));
        }
        out.push(CountRow {
            line,
            count: parse_count(line, &value)?,
            label,
        });
    }
    Ok(out)
}

/// Parses a `label,prob` file into a labelled distribution.
pub fn parse_model_csv(text: &str) -> Result<BinDistribution> {
    let rows = read_two_columns(text, "prob")?;
    let mut labels = Vec::with_capacity(rows.len());
    let mut probs = Vec::with_capacity(rows.len());
    for (line, label, value) in rows {
        let p: f64 = value
            .parse()
            .map_err(|_| parse_err(line, format!("probability '{value}' is not a number")))?;
        if !p.is_finite() || p < 0.0 {
            return Err(parse_err(
                line,
                format!("probability {p} must be finite and nonnegative"),
            ));
        }
        if labels.contains(&label) {
            return Err(parse_err(line, format!("label '{label}' repeated")));
        }
        labels.push(label);
        probs.push(p);
    }
    BinDistribution::with_labels(probs, labels)
}

/// A model named on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Uniform(usize),
    Poisson(f64),
    HardyWeinberg,
    SparseUniform(u64),
    /// A `label,prob` file.
    File(String),
}

impl FromStr for ModelSpec {
    type Err = GofError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let need = |what: &str| {
            arg.ok_or_else(|| {
                GofError::invalid(format!(
                    "model '{head}' needs an argument, e.g. '{head}:{what}'"
                ))
            })
        };
        let bad = |a: &str| GofError::invalid(format!("bad argument '{a}' in model spec '{s}'"));
        Ok(match head {
            "uniform" => {
                let a = need("5")?;
                ModelSpec::Uniform(a.parse().map_err(|_| bad(a))?)
            }
            "poisson" => {
                let a = need("100")?;
                ModelSpec::Poisson(a.parse().map_err(|_| bad(a))?)
            }
            "hw" | "hardy-weinberg" if arg.is_none() => ModelSpec::HardyWeinberg,
            "sparse-uniform" => {
                let a = need("4294967296")?;
                ModelSpec::SparseUniform(a.parse().map_err(|_| bad(a))?)
            }
            _ => ModelSpec::File(s.to_string()),
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Uniform(m) => write!(f, "uniform:{m}"),
            ModelSpec::Poisson(l) => write!(f, "poisson:{l}"),
            ModelSpec::HardyWeinberg => write!(f, "hw"),
            ModelSpec::SparseUniform(m) => write!(f, "sparse-uniform:{m}"),
            ModelSpec::File(p) => write!(f, "{p}"),
        }
    }
}

impl ModelSpec {
    /// Builds a dense model. File specs are read through `read_file`.
    pub fn build(&self, read_file: impl FnOnce(&str) -> Result<String>) -> Result<Model> {
        Ok(match self {
            ModelSpec::Uniform(m) => Model::Fixed(make_uniform(*m)?),
            ModelSpec::Poisson(l) => {
                Model::Fixed(poisson_model(*l, DEFAULT_TAIL_TOLERANCE)?.into_distribution())
            }
            ModelSpec::HardyWeinberg => Model::Parametric(Arc::new(HardyWeinberg::default())),
            ModelSpec::SparseUniform(_) => {
                return Err(GofError::UnsupportedModel(
                    "sparse-uniform models are only available to the rng-uniform test".into(),
                ))
            }
            ModelSpec::File(path) => Model::Fixed(parse_model_csv(&read_file(path)?)?),
        })
    }

    pub fn sparse(&self) -> Result<SparseUniformModel> {
        match self {
            ModelSpec::SparseUniform(m) => SparseUniformModel::new(*m),
            other => Err(GofError::UnsupportedModel(format!(
                "'{other}' is not a sparse-uniform model"
            ))),
        }
    }
}

/// Places counts rows onto the model's bins: by label when the model is
/// labelled (missing labels count zero), by position otherwise.
pub fn align_counts(rows: &[CountRow], model: &Model) -> Result<EmpiricalCounts> {
    let m = model.num_bins();
    let counts = match model.labels() {
        Some(labels) => {
            let mut counts = vec![0u64; m];
            for row in rows {
                let j = labels.iter().position(|l| *l == row.label).ok_or_else(|| {
                    parse_err(
                        row.line,
                        format!("label '{}' is not a bin of the model", row.label),
                    )
                })?;
                counts[j] = row.count;
            }
            counts
        }
        None => {
            if rows.len() != m {
                return Err(GofError::DimensionMismatch {
                    data: rows.len(),
                    model: m,
                });
            }
            rows.iter().map(|r| r.count).collect()
        }
    };
    EmpiricalCounts::dense(counts)
}

/// Parses one draw per line, each in `1..=support`, into zero-based bins.
pub fn parse_draws_text(text: &str, support: u64) -> Result<Vec<u64>> {
    let mut draws = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        let v = parse_count(line, s)?;
        if v == 0 || v > support {
            return Err(parse_err(
                line,
                format!("draw {v} is outside 1..={support}"),
            ));
        }
        draws.push(v - 1);
    }
    if draws.is_empty() {
        return Err(GofError::invalid("the draw stream is empty"));
    }
    Ok(draws)
}

/// Parses little-endian u32 draws. Each word `w` is the zero-based bin, i.e.
/// the draw `w + 1`, so the whole range `1..=2^32` is representable. The
/// reported offset of a bad word is in bytes.
pub fn parse_draws_binary(bytes: &[u8], support: u64) -> Result<Vec<u64>> {
    if bytes.is_empty() {
        return Err(GofError::invalid("the draw stream is empty"));
    }
    if !bytes.len().is_multiple_of(4) {
        return Err(GofError::invalid(format!(
            "stream length {} is not a multiple of 4 bytes",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(4)
        .enumerate()
        .map(|(i, w)| {
            let v = u32::from_le_bytes([w[0], w[1], w[2], w[3]]) as u64;
            if v >= support {
                Err(GofError::invalid(format!(
                    "word at byte offset {} encodes draw {} outside 1..={support}",
                    4 * i,
                    v + 1
                )))
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e16)`;
/// empty when not finite.
fn csv_number(x: f64) -> String {
    if !x.is_finite() {
        String::new()
    } else if x == 0.0 || (1e-4..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Pmf,
    Cmf,
    TrialPvalues,
}

/// Columns of plot data, written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub kind: PlotKind,
    pub x_name: String,
    pub x: Vec<String>,
    pub series: Vec<(String, Vec<f64>)>,
}

impl PlotSeries {
    /// Per-bin probabilities of a model next to observed proportions.
    pub fn pmf(model: &BinDistribution, observed: &[f64]) -> Self {
        Self {
            kind: PlotKind::Pmf,
            x_name: "x".into(),
            x: bin_labels(model),
            series: vec![
                ("model".into(), model.probs().to_vec()),
                ("observed".into(), observed.to_vec()),
            ],
        }
    }

    /// Cumulative version of [`PlotSeries::pmf`].
    pub fn cmf(model: &BinDistribution, observed: &[f64]) -> Self {
        let running = |v: &[f64]| {
            let mut acc = CompensatedSum::new();
            v.iter()
                .map(|&p| {
                    acc.add(p);
                    acc.value()
                })
                .collect::<Vec<f64>>()
        };
        Self {
            kind: PlotKind::Cmf,
            x_name: "x".into(),
            x: bin_labels(model),
            series: vec![
                ("model".into(), running(model.probs())),
                ("observed".into(), running(observed)),
            ],
        }
    }

    /// P-values by statistic (rows) and trial (columns).
    pub fn trial_pvalues(trials: &[TrialResult]) -> Self {
        let kinds: Vec<_> = trials
            .first()
            .map(|t| t.reports.iter().map(|r| r.statistic).collect())
            .unwrap_or_default();
        Self {
            kind: PlotKind::TrialPvalues,
            x_name: "statistic".into(),
            x: kinds.iter().map(|k| k.name().to_string()).collect(),
            series: trials
                .iter()
                .map(|t| {
                    let ys = kinds
                        .iter()
                        .map(|&k| t.report(k).map_or(f64::NAN, |r| r.p_value))
                        .collect();
                    (format!("trial_{}", t.trial), ys)
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.x_name.clone();
        for (name, _) in &self.series {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, x) in self.x.iter().enumerate() {
            out.push_str(x);
            for (_, ys) in &self.series {
                out.push(',');
                out.push_str(&csv_number(ys[i]));
            }
            out.push('\n');
        }
        out
    }
}

fn bin_labels(model: &BinDistribution) -> Vec<String> {
    match model.labels() {
        Some(l) => l.to_vec(),
        None => (0..model.len()).map(|j| j.to_string()).collect(),
    }
}
