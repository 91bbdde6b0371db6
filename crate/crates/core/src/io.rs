//! Run artifacts: CSV traces, JSON reports, and their re-ingestion.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! re-reading a file reproduces the original doubles bit for bit and a rerun
//! with the same seed produces byte-identical artifacts. Manifests carry no
//! timestamps or host details for the same reason.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::HyperConfig;
use crate::post::{DensityGrid, FitReport, Waic};
use crate::sampler::ChainDraws;
use crate::simbench::{GroundTruth, RecoveryMetrics, ScenarioSpec};
use crate::variants::ordinal::OrdinalConfig;
use crate::{Error, Result};

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn csv_io(e: csv::Error) -> Error {
    Error::from(e)
}

fn parse_field(field: &str, what: &str, line: usize) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        Error::Parse(format!("line {line}: {what} `{field}` is not a number"))
    })
}

fn write_json<T: Serialize, P: AsRef<Path>>(path: P, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("serializing {}: {e}", path.as_ref().display())))?;
    text.push('\n');
    fs::write(path.as_ref(), text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>, P: AsRef<Path>>(path: P) -> Result<T> {
    let text = fs::read_to_string(path.as_ref())?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))
}

/// Dataset shape echoed into the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub num_subjects: usize,
    pub num_raters: usize,
    pub num_observations: usize,
    pub scale_min: f64,
    pub scale_max: f64,
}

/// Sampler warning totals across chains.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WarningCounters {
    pub dm_fallbacks: u64,
    pub dm_nonconverged: u64,
}

/// Reproducibility record for one run directory: rerunning the recorded
/// command with this configuration and seed regenerates every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfg: Option<HyperConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<OrdinalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warnings: Option<WarningCounters>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            cfg: None,
            ordinal: None,
            scenario: None,
            n_chains: None,
            data: None,
            warnings: None,
            notes: Vec::new(),
        }
    }
}

pub fn write_manifest<P: AsRef<Path>>(path: P, m: &Manifest) -> Result<()> {
    write_json(path, m)
}

pub fn read_manifest<P: AsRef<Path>>(path: P) -> Result<Manifest> {
    read_json(path)
}

pub fn write_report<P: AsRef<Path>>(path: P, report: &FitReport) -> Result<()> {
    write_json(path, report)
}

pub fn read_report<P: AsRef<Path>>(path: P) -> Result<FitReport> {
    read_json(path)
}

pub fn write_truth<P: AsRef<Path>>(path: P, truth: &GroundTruth) -> Result<()> {
    write_json(path, truth)
}

pub fn read_truth<P: AsRef<Path>>(path: P) -> Result<GroundTruth> {
    read_json(path)
}

/// Per-chain artifact path: `<stem>_chain<k>.csv` inside `dir`.
pub fn chain_file(dir: &Path, stem: &str, chain: usize) -> PathBuf {
    dir.join(format!("{stem}_chain{chain}.csv"))
}

const SCALAR_HEADER: [&str; 12] = [
    "draw",
    "mu_g",
    "omega2_g",
    "eta_h",
    "phi2_h",
    "beta_h",
    "sigma_tilde_h",
    "icc_a",
    "alpha1",
    "alpha2",
    "occ_subject",
    "occ_rater",
];

/// One row per retained draw: mixture functionals, concentrations, and
/// occupied-cluster counts.
pub fn write_scalars_csv<P: AsRef<Path>>(path: P, draws: &ChainDraws) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(SCALAR_HEADER).map_err(csv_io)?;
    for t in 0..draws.len() {
        let s = &draws.subject_summary[t];
        let r = &draws.rater_summary[t];
        w.write_record([
            t.to_string(),
            fmt(s.mean),
            fmt(s.var),
            fmt(r.bias_mean),
            fmt(r.bias_var),
            fmt(r.relia_mean),
            fmt(r.resid_mean),
            fmt(r.icc_a),
            fmt(draws.alpha1[t]),
            fmt(draws.alpha2[t]),
            s.occupied.to_string(),
            r.occupied.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Columnar scalar traces re-ingested from [`write_scalars_csv`] output.
#[derive(Debug, Clone, Default)]
pub struct ScalarTraces {
    pub mu_g: Vec<f64>,
    pub omega2_g: Vec<f64>,
    pub eta_h: Vec<f64>,
    pub phi2_h: Vec<f64>,
    pub beta_h: Vec<f64>,
    pub sigma_tilde_h: Vec<f64>,
    pub icc_a: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub occ_subject: Vec<usize>,
    pub occ_rater: Vec<usize>,
}

impl ScalarTraces {
    pub fn len(&self) -> usize {
        self.mu_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu_g.is_empty()
    }

    /// Appends another trace block (pooling chains).
    pub fn extend(&mut self, other: ScalarTraces) {
        self.mu_g.extend(other.mu_g);
        self.omega2_g.extend(other.omega2_g);
        self.eta_h.extend(other.eta_h);
        self.phi2_h.extend(other.phi2_h);
        self.beta_h.extend(other.beta_h);
        self.sigma_tilde_h.extend(other.sigma_tilde_h);
        self.icc_a.extend(other.icc_a);
        self.alpha1.extend(other.alpha1);
        self.alpha2.extend(other.alpha2);
        self.occ_subject.extend(other.occ_subject);
        self.occ_rater.extend(other.occ_rater);
    }
}

pub fn read_scalars_csv<P: AsRef<Path>>(path: P) -> Result<ScalarTraces> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("reading header: {e}")))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != SCALAR_HEADER {
            return Err(Error::Parse(format!(
                "expected scalar trace header, got `{}`",
                got.join(",")
            )));
        }
    }
    let mut out = ScalarTraces::default();
    for (line0, record) in reader.records().enumerate() {
        let line = line0 + 2;
        let record = record.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        if record.len() != SCALAR_HEADER.len() {
            return Err(Error::Parse(format!(
                "line {line}: expected {} fields, got {}",
                SCALAR_HEADER.len(),
                record.len()
            )));
        }
        out.mu_g.push(parse_field(&record[1], "mu_g", line)?);
        out.omega2_g.push(parse_field(&record[2], "omega2_g", line)?);
        out.eta_h.push(parse_field(&record[3], "eta_h", line)?);
        out.phi2_h.push(parse_field(&record[4], "phi2_h", line)?);
        out.beta_h.push(parse_field(&record[5], "beta_h", line)?);
        out.sigma_tilde_h
            .push(parse_field(&record[6], "sigma_tilde_h", line)?);
        out.icc_a.push(parse_field(&record[7], "icc_a", line)?);
        out.alpha1.push(parse_field(&record[8], "alpha1", line)?);
        out.alpha2.push(parse_field(&record[9], "alpha2", line)?);
        for (field, dst) in [(10, &mut out.occ_subject), (11, &mut out.occ_rater)] {
            dst.push(record[field].parse::<usize>().map_err(|_| {
                Error::Parse(format!(
                    "line {line}: occupancy `{}` is not a count",
                    &record[field]
                ))
            })?);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// Wide per-entity trace: `draw` column then one column per entity label.
pub fn write_trace_csv<P: AsRef<Path>>(
    path: P,
    labels: &[String],
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = Vec::with_capacity(labels.len() + 1);
    header.push("draw".to_string());
    header.extend(labels.iter().cloned());
    w.write_record(&header).map_err(csv_io)?;
    for (t, row) in rows.iter().enumerate() {
        if row.len() != labels.len() {
            return Err(Error::BadParameter(format!(
                "draw {t} has {} entries for {} labels",
                row.len(),
                labels.len()
            )));
        }
        let mut record = Vec::with_capacity(row.len() + 1);
        record.push(t.to_string());
        record.extend(row.iter().map(|&x| fmt(x)));
        w.write_record(&record).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<P: AsRef<Path>>(path: P) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
    let labels: Vec<String> = {
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("reading header: {e}")))?;
        if headers.get(0) != Some("draw") {
            return Err(Error::Parse("trace header must start with `draw`".into()));
        }
        headers.iter().skip(1).map(str::to_string).collect()
    };
    let mut rows = Vec::new();
    for (line0, record) in reader.records().enumerate() {
        let line = line0 + 2;
        let record = record.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        if record.len() != labels.len() + 1 {
            return Err(Error::Parse(format!(
                "line {line}: expected {} fields, got {}",
                labels.len() + 1,
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(labels.len());
        for field in record.iter().skip(1) {
            row.push(parse_field(field, "trace value", line)?);
        }
        rows.push(row);
    }
    Ok((labels, rows))
}

/// Long-format subject mixture snapshots: one row per (draw, atom).
pub fn write_subject_mix_csv<P: AsRef<Path>>(path: P, draws: &ChainDraws) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["draw", "atom", "weight", "mean", "var", "n"])
        .map_err(csv_io)?;
    for t in 0..draws.len() {
        for (k, a) in draws.subject_atoms[t].iter().enumerate() {
            w.write_record([
                t.to_string(),
                k.to_string(),
                fmt(draws.subject_weights[t][k]),
                fmt(a.mean),
                fmt(a.var),
                draws.subject_occ[t][k].to_string(),
            ])
            .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long-format rater mixture snapshots: one row per (draw, atom).
pub fn write_rater_mix_csv<P: AsRef<Path>>(path: P, draws: &ChainDraws) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["draw", "atom", "weight", "bias", "bias_var", "gamma", "beta", "n"])
        .map_err(csv_io)?;
    for t in 0..draws.len() {
        for (k, a) in draws.rater_atoms[t].iter().enumerate() {
            w.write_record([
                t.to_string(),
                k.to_string(),
                fmt(draws.rater_weights[t][k]),
                fmt(a.bias),
                fmt(a.bias_var),
                fmt(a.gamma),
                fmt(a.beta),
                draws.rater_occ[t][k].to_string(),
            ])
            .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One rater-mixture atom re-ingested from a snapshot row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaterMixRow {
    pub weight: f64,
    pub bias: f64,
    pub bias_var: f64,
    pub gamma: f64,
    pub beta: f64,
    pub occupancy: usize,
}

/// Snapshots grouped per draw, atoms in index order.
pub fn read_rater_mix_csv<P: AsRef<Path>>(path: P) -> Result<Vec<Vec<RaterMixRow>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("reading header: {e}")))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != ["draw", "atom", "weight", "bias", "bias_var", "gamma", "beta", "n"] {
            return Err(Error::Parse(format!(
                "expected rater mixture header, got `{}`",
                got.join(",")
            )));
        }
    }
    let mut out: Vec<Vec<RaterMixRow>> = Vec::new();
    for (line0, record) in reader.records().enumerate() {
        let line = line0 + 2;
        let record = record.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        if record.len() != 8 {
            return Err(Error::Parse(format!(
                "line {line}: expected 8 fields, got {}",
                record.len()
            )));
        }
        let draw: usize = record[0]
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: draw index `{}`", &record[0])))?;
        let atom: usize = record[1]
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: atom index `{}`", &record[1])))?;
        if draw == out.len() {
            out.push(Vec::new());
        }
        if draw + 1 != out.len() || atom != out[draw].len() {
            return Err(Error::Parse(format!(
                "line {line}: rows out of (draw, atom) order"
            )));
        }
        out[draw].push(RaterMixRow {
            weight: parse_field(&record[2], "weight", line)?,
            bias: parse_field(&record[3], "bias", line)?,
            bias_var: parse_field(&record[4], "bias_var", line)?,
            gamma: parse_field(&record[5], "gamma", line)?,
            beta: parse_field(&record[6], "beta", line)?,
            occupancy: record[7].parse::<usize>().map_err(|_| {
                Error::Parse(format!("line {line}: occupancy `{}`", &record[7]))
            })?,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// Density grid as plot-ready CSV: grid point, posterior mean curve, and the
/// pointwise 95% band.
pub fn write_density_csv<P: AsRef<Path>>(path: P, grid: &DensityGrid) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["point", "mean", "lo", "hi"]).map_err(csv_io)?;
    for (k, &p) in grid.points.iter().enumerate() {
        w.write_record([fmt(p), fmt(grid.mean[k]), fmt(grid.lo[k]), fmt(grid.hi[k])])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Interior thresholds `delta_1..delta_{K-1}` per retained draw, exactly as
/// the ordinal driver records them (the infinite outer bounds are implied).
pub fn write_thresholds_csv<P: AsRef<Path>>(path: P, thresholds: &[Vec<f64>]) -> Result<()> {
    let interior = thresholds
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::BadParameter("no threshold draws to write".into()))?;
    if interior == 0 {
        return Err(Error::BadParameter("threshold rows are empty".into()));
    }
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["draw".to_string()];
    header.extend((1..=interior).map(|k| format!("delta_{k}")));
    w.write_record(&header).map_err(csv_io)?;
    for (t, row) in thresholds.iter().enumerate() {
        if row.len() != interior {
            return Err(Error::BadParameter(format!(
                "draw {t} has {} thresholds, expected {interior}",
                row.len()
            )));
        }
        let mut record = vec![t.to_string()];
        record.extend(row.iter().map(|&x| fmt(x)));
        w.write_record(&record).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_csv<P: AsRef<Path>>(path: P, metrics: &RecoveryMetrics) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["family", "s_rmse", "s_mae"]).map_err(csv_io)?;
    for row in &metrics.rows {
        w.write_record([row.family.as_str(), &fmt(row.s_rmse), &fmt(row.s_mae)])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Model-comparison table; `delta_waic` is against the best (lowest) entry.
pub fn write_waic_csv<P: AsRef<Path>>(path: P, rows: &[(String, Waic)]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::BadParameter("no models in the WAIC table".into()));
    }
    let best = rows.iter().map(|(_, w)| w.waic).fold(f64::INFINITY, f64::min);
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["model", "waic", "lppd", "p_waic", "delta_waic"])
        .map_err(csv_io)?;
    for (name, row) in rows {
        w.write_record([
            name.as_str(),
            &fmt(row.waic),
            &fmt(row.lppd),
            &fmt(row.p_waic),
            &fmt(row.waic - best),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}
