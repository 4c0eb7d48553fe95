//! File formats: event CSVs, TOML model files, matrix and trajectory CSVs.
//!
//! Event files have the header `t,u` and one event per row, times strictly
//! increasing. Exact timestamp ties are shifted forward by [`TIE_SHIFT`].
//!
//! Model files:
//!
//! ```toml
//! d = 2
//! mu = [0.5, 0.4]
//! a = [[0.2, 0.1], [0.0, 0.3]]   # a[i][j]: influence of j on i
//!
//! [kernel]
//! family = "exponential"          # or "tabulated" with grid = [[t, phi], ...]
//! beta = 1.0
//! truncation = 5.0                # optional
//!
//! [[edge_kernels]]                # optional per-edge overrides
//! i = 0
//! j = 1
//! family = "tabulated"
//! grid = [[0.0, 1.0], [1.0, 1.0]]
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::GridReport;
use crate::error::{HawkesError, Result};
use crate::model::KernelTable;
use crate::{Event, EventStream, HawkesModel, KernelSpec};

/// Offset applied to an event whose timestamp ties with its predecessor.
pub const TIE_SHIFT: f64 = 1e-9;

fn float(x: f64) -> String {
    // 17 significant digits round-trip every f64
    format!("{x:.16e}")
}

/// Reads an event CSV. The horizon defaults to the last event time.
pub fn read_events<R: Read>(reader: R, horizon: Option<f64>) -> Result<EventStream> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| HawkesError::Parse { line: 1, msg: e.to_string() })?;
    if headers.iter().collect::<Vec<_>>() != ["t", "u"] {
        return Err(HawkesError::Parse { line: 1, msg: format!("expected header `t,u`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")) });
    }
    let mut events: Vec<Event> = Vec::new();
    let mut last_raw = f64::NEG_INFINITY;
    for record in rdr.records() {
        let record = record.map_err(|e| HawkesError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |msg: String| HawkesError::Parse { line, msg };
        if record.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", record.len())));
        }
        let t: f64 = record[0].parse().map_err(|_| bad(format!("invalid time `{}`", &record[0])))?;
        let u: usize = record[1].parse().map_err(|_| bad(format!("invalid node `{}`", &record[1])))?;
        if !t.is_finite() || t < 0.0 {
            return Err(bad(format!("time {t} must be finite and >= 0")));
        }
        if t < last_raw {
            return Err(bad(format!("time {t} decreases (previous {last_raw})")));
        }
        let mut shifted = t;
        if let Some(prev) = events.last() {
            if shifted <= prev.t {
                shifted = prev.t + TIE_SHIFT;
                log::warn!("line {line}: timestamp {t} ties with the previous event; shifted to {shifted}");
            }
        }
        last_raw = t;
        events.push(Event::new(shifted, u));
    }
    let horizon = horizon.unwrap_or_else(|| events.last().map_or(0.0, |e| e.t));
    EventStream::new(events, horizon)
}

fn open_error(path: &Path, e: std::io::Error) -> HawkesError {
    HawkesError::Format(format!("{}: {e}", path.display()))
}

pub fn parse_events(path: &Path, horizon: Option<f64>) -> Result<EventStream> {
    read_events(fs::File::open(path).map_err(|e| open_error(path, e))?, horizon)
}

pub fn write_events_to<W: Write>(events: &EventStream, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| HawkesError::Format(e.to_string());
    w.write_record(["t", "u"]).map_err(io)?;
    for e in events.events() {
        w.write_record([float(e.t), e.u.to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_events(events: &EventStream, path: &Path) -> Result<()> {
    write_events_to(events, fs::File::create(path)?)
}

/// Trajectory CSV with columns `t,S,tau_hat` (`tau_hat` empty when undefined).
pub fn write_trajectory(trajectory: &[GridReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HawkesError::Format(e.to_string()))?;
    let io = |e: csv::Error| HawkesError::Format(e.to_string());
    w.write_record(["t", "S", "tau_hat"]).map_err(io)?;
    for r in trajectory {
        w.write_record([float(r.t), float(r.stat), r.tau_hat.map(float).unwrap_or_default()]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Headerless CSV of a square matrix, one row per line.
pub fn read_matrix(path: &Path) -> Result<nalgebra::DMatrix<f64>> {
    let file = fs::File::open(path).map_err(|e| open_error(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| HawkesError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| HawkesError::Parse { line, msg: format!("invalid number `{f}`") }))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(HawkesError::DimensionMismatch { expected: n, got: r.len() });
    }
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn write_matrix(m: &nalgebra::DMatrix<f64>, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| HawkesError::Format(e.to_string()))?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|&x| float(x))).map_err(|e| HawkesError::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelEntry {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeKernelEntry {
    i: usize,
    j: usize,
    #[serde(flatten)]
    kernel: KernelEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    d: usize,
    mu: Vec<f64>,
    a: Vec<Vec<f64>>,
    kernel: KernelEntry,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    edge_kernels: Vec<EdgeKernelEntry>,
}

impl KernelEntry {
    fn to_spec(&self) -> Result<KernelSpec> {
        let spec = match self.family.as_str() {
            "exponential" => {
                if self.grid.is_some() {
                    return Err(HawkesError::Format("exponential kernels take `beta`, not `grid`".into()));
                }
                let beta = self.beta.ok_or_else(|| HawkesError::Format("exponential kernel needs `beta`".into()))?;
                KernelSpec::exponential(beta)?
            }
            "tabulated" => {
                if self.beta.is_some() {
                    return Err(HawkesError::Format("tabulated kernels take `grid`, not `beta`".into()));
                }
                let grid = self.grid.as_ref().ok_or_else(|| HawkesError::Format("tabulated kernel needs `grid`".into()))?;
                let samples: Vec<(f64, f64)> = grid.iter().map(|p| (p[0], p[1])).collect();
                KernelSpec::tabulated(&samples)?
            }
            other => return Err(HawkesError::Format(format!("unknown kernel family `{other}`"))),
        };
        spec.with_truncation(self.truncation)
    }

    fn from_spec(k: &KernelSpec) -> Self {
        match k.exponential_rate() {
            Some(beta) => KernelEntry { family: "exponential".into(), beta: Some(beta), grid: None, truncation: k.truncation },
            None => {
                let grid = match &k.family {
                    crate::kernel::KernelFamily::Tabulated(tab) => tab.samples().map(|(t, v)| [t, v]).collect(),
                    crate::kernel::KernelFamily::Exponential { .. } => unreachable!(),
                };
                KernelEntry { family: "tabulated".into(), beta: None, grid: Some(grid), truncation: k.truncation }
            }
        }
    }
}

/// Parses a TOML model; unknown keys are rejected.
pub fn model_from_toml(text: &str) -> Result<HawkesModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| HawkesError::Format(e.to_string()))?;
    if file.mu.len() != file.d {
        return Err(HawkesError::DimensionMismatch { expected: file.d, got: file.mu.len() });
    }
    let shared = file.kernel.to_spec()?;
    if file.edge_kernels.is_empty() {
        return HawkesModel::new(file.mu, file.a, shared);
    }
    let d = file.d;
    let mut table = vec![shared; d * d];
    for e in &file.edge_kernels {
        if e.i >= d || e.j >= d {
            return Err(HawkesError::Format(format!("edge kernel ({}, {}) outside the network", e.i, e.j)));
        }
        table[e.i * d + e.j] = e.kernel.to_spec()?;
    }
    HawkesModel::with_kernels(file.mu, file.a, KernelTable::PerEdge(table))
}

pub fn model_to_toml(model: &HawkesModel) -> Result<String> {
    let d = model.dim();
    let (kernel, edge_kernels) = match model.kernels() {
        KernelTable::Shared(k) => (KernelEntry::from_spec(k), Vec::new()),
        KernelTable::PerEdge(table) => {
            let base = KernelEntry::from_spec(&table[0]);
            let edges = (0..d * d)
                .filter(|&k| KernelEntry::from_spec(&table[k]) != base)
                .map(|k| EdgeKernelEntry { i: k / d, j: k % d, kernel: KernelEntry::from_spec(&table[k]) })
                .collect();
            (base, edges)
        }
    };
    let file = ModelFile { d, mu: model.mu().to_vec(), a: model.alpha_rows(), kernel, edge_kernels };
    toml::to_string(&file).map_err(|e| HawkesError::Format(e.to_string()))
}

pub fn read_model(path: &Path) -> Result<HawkesModel> {
    model_from_toml(&fs::read_to_string(path).map_err(|e| open_error(path, e))?)
}

pub fn write_model(model: &HawkesModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_toml(model)?)?;
    Ok(())
}
