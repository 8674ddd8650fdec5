//! File formats: event CSVs with a JSON sidecar, and JSON documents for
//! fitted models, ground truths and variational posteriors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::events::{Event, EventSequence, TIE_EPSILON};
use crate::kernel::KernelSpec;
use crate::model::ModelParams;
use crate::simulate::GroundTruth;
use crate::vi::{EmConfig, HyperParams, PriorSpec, VariationalFit, VariationalState};

/// Stamped into every JSON document this crate writes.
pub const FORMAT_VERSION: &str = concat!("hawkes-vem ", env!("CARGO_PKG_VERSION"));

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HawkesError + '_ {
    move |source| HawkesError::Io { path: path.to_path_buf(), source }
}

fn validation(path: &Path, msg: impl Into<String>) -> HawkesError {
    HawkesError::Validation { path: path.to_path_buf(), msg: msg.into() }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| HawkesError::Json { path: path.into(), source })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| HawkesError::Json { path: path.into(), source })
}

/// Sidecar describing an event file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMeta {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "D")]
    pub dims: usize,
    #[serde(default)]
    pub version: String,
}

/// `dir/name.csv` -> `dir/name.meta.json`.
pub fn meta_path(events_path: &Path) -> PathBuf {
    events_path.with_extension("meta.json")
}

/// Writes `time,dim` rows plus the metadata sidecar.
pub fn write_events(path: &Path, seq: &EventSequence) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["time", "dim"])?;
    for ev in seq.events() {
        w.write_record([ev.time.to_string(), ev.dim.to_string()])?;
    }
    w.flush().map_err(io_err(path))?;
    let meta = EventMeta { horizon: seq.horizon(), dims: seq.dims(), version: FORMAT_VERSION.into() };
    write_json(&meta_path(path), &meta)
}

/// Reads an event CSV. `D` and `T` come from the sidecar when present;
/// otherwise `D` is `max dim + 1` and `T` extends the last event by the mean
/// inter-event gap. Tied timestamps are spread by `TIE_EPSILON`.
pub fn load_events(path: &Path) -> Result<EventSequence> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file));
    let parse_err = |line: usize, msg: String| HawkesError::Parse { path: path.to_path_buf(), line, msg };
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "time" || &headers[1] != "dim" {
        return Err(parse_err(1, format!("expected header `time,dim`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", record.len())));
        }
        let time: f64 = record[0].parse().map_err(|_| parse_err(line, format!("`{}` is not a number", &record[0])))?;
        let dim: usize = record[1]
            .parse()
            .map_err(|_| parse_err(line, format!("`{}` is not a nonnegative integer", &record[1])))?;
        if !time.is_finite() || time < 0.0 {
            return Err(validation(path, format!("line {line}: time {time} must be finite and nonnegative")));
        }
        if let Some(prev) = events.last().map(|e: &Event| e.time) {
            if time < prev - TIE_EPSILON * (events.len() as f64 + 1.0) {
                return Err(validation(path, format!("line {line}: rows must be sorted by time ({time} after {prev})")));
            }
        }
        events.push(Event::new(time, dim));
    }
    let meta_file = meta_path(path);
    let (horizon, dims) = if meta_file.exists() {
        let meta: EventMeta = read_json(&meta_file)?;
        (meta.horizon, meta.dims)
    } else {
        let dims = events.iter().map(|e| e.dim + 1).max().unwrap_or(1);
        let horizon = match (events.first(), events.last()) {
            (Some(first), Some(last)) if events.len() > 1 && last.time > first.time => {
                last.time + (last.time - first.time) / (events.len() - 1) as f64
            }
            (_, Some(last)) => last.time + 1.0,
            _ => 1.0,
        };
        (horizon, dims)
    };
    EventSequence::with_tie_breaking(events, horizon, dims).map_err(|e| match e {
        HawkesError::InvalidSequence(msg) => validation(path, msg),
        other => other,
    })
}

/// `W[i][j][m]` from the flat layout.
pub fn nest_weights(params: &ModelParams) -> Vec<Vec<Vec<f64>>> {
    let d = params.dims();
    (0..d).map(|i| (0..d).map(|j| params.edge(i, j).to_vec()).collect()).collect()
}

fn flatten_weights(w: &[Vec<Vec<f64>>], dims: usize) -> std::result::Result<(Vec<f64>, usize), String> {
    if w.len() != dims || w.iter().any(|row| row.len() != dims) {
        return Err(format!("W must be {dims}x{dims}xM"));
    }
    let nb = w.first().and_then(|r| r.first()).map_or(1, Vec::len);
    if w.iter().flatten().any(|c| c.len() != nb) {
        return Err("every W[i][j] must have the same number of bases".into());
    }
    Ok((w.iter().flatten().flatten().copied().collect(), nb))
}

/// Fitted or true point parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default)]
    pub version: String,
    pub kernel: KernelSpec,
    pub mu: Vec<f64>,
    #[serde(rename = "W")]
    pub weights: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<String>,
}

impl ModelFile {
    pub fn new(kernel: &KernelSpec, params: &ModelParams) -> Self {
        Self {
            version: FORMAT_VERSION.into(),
            kernel: kernel.clone(),
            mu: params.mu.clone(),
            weights: nest_weights(params),
            estimator: None,
        }
    }

    pub fn params(&self) -> std::result::Result<ModelParams, String> {
        let (w, nb) = flatten_weights(&self.weights, self.mu.len())?;
        if nb != self.kernel.num_basis() {
            return Err(format!("W has {nb} bases but the kernel has {}", self.kernel.num_basis()));
        }
        ModelParams::new(self.mu.clone(), w, nb).map_err(|e| e.to_string())
    }
}

/// Ground truth of a synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    #[serde(flatten)]
    pub model: ModelFile,
    /// `adjacency[i][j]` marks the edge `j -> i`.
    pub adjacency: Vec<Vec<bool>>,
}

impl TruthFile {
    pub fn new(kernel: &KernelSpec, truth: &GroundTruth) -> Self {
        let d = truth.dims();
        Self {
            model: ModelFile::new(kernel, &truth.params),
            adjacency: truth.adjacency.chunks(d).map(<[bool]>::to_vec).collect(),
        }
    }

    pub fn truth(&self) -> std::result::Result<GroundTruth, String> {
        let params = self.model.params()?;
        let d = params.dims();
        if self.adjacency.len() != d || self.adjacency.iter().any(|r| r.len() != d) {
            return Err(format!("adjacency must be {d}x{d}"));
        }
        Ok(GroundTruth { adjacency: self.adjacency.concat(), params })
    }
}

/// Variational posterior with its learned prior scales.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorFile {
    #[serde(default)]
    pub version: String,
    pub kernel: KernelSpec,
    pub prior: PriorSpec,
    pub state: VariationalState,
    pub alpha: HyperParams,
    pub config: EmConfig,
    pub elbo_trace: Vec<f64>,
    /// Posterior mode of `mu` and `W`, for convenience.
    pub mode: ModelFile,
}

impl PosteriorFile {
    pub fn new(kernel: &KernelSpec, fit: &VariationalFit) -> Self {
        Self {
            version: FORMAT_VERSION.into(),
            kernel: kernel.clone(),
            prior: fit.prior,
            state: fit.state.clone(),
            alpha: fit.hyper.clone(),
            config: fit.config.clone(),
            elbo_trace: fit.elbo_trace.clone(),
            mode: ModelFile::new(kernel, &fit.posterior_mode()),
        }
    }
}

/// A model loaded from either a point-estimate file or a posterior file.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub kernel: KernelSpec,
    pub params: ModelParams,
    pub posterior: Option<VariationalState>,
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let value: serde_json::Value = read_json(path)?;
    let to_json_err = |source| HawkesError::Json { path: path.into(), source };
    if value.get("state").is_some() {
        let post: PosteriorFile = serde_json::from_value(value).map_err(to_json_err)?;
        let state = post.state;
        if state.num_basis != post.kernel.num_basis() {
            return Err(validation(path, "posterior and kernel disagree on the number of bases"));
        }
        Ok(LoadedModel { kernel: post.kernel, params: state.posterior_mode(), posterior: Some(state) })
    } else {
        let file: ModelFile = serde_json::from_value(value).map_err(to_json_err)?;
        let params = file.params().map_err(|m| validation(path, m))?;
        Ok(LoadedModel { kernel: file.kernel, params, posterior: None })
    }
}

pub fn load_truth(path: &Path) -> Result<(KernelSpec, GroundTruth)> {
    let file: TruthFile = read_json(path)?;
    let truth = file.truth().map_err(|m| validation(path, m))?;
    Ok((file.model.kernel, truth))
}

/// `iteration,objective` rows.
pub fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["iteration", "objective"])?;
    for (k, v) in trace.iter().enumerate() {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush().map_err(io_err(path))
}
