use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::error::{HawkesError, Result};

use super::{ResultRow, TaskOutcome};

/// Mean and sample standard deviation of the finite values in one
/// `(metric, sweep value, estimator)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub metric: String,
    pub sweep_value: usize,
    pub estimator: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Groups rows by `(metric, sweep value, estimator)` in sorted order. Values
/// are summed in `(graph, sim)` order; NaN rows are skipped.
pub fn aggregate(rows: &[ResultRow]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(&str, usize, &str), Vec<(usize, usize, f64)>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.metric, r.sweep_value, &r.estimator)).or_default().push((r.graph, r.sim, r.value));
    }
    groups
        .into_iter()
        .map(|((metric, sweep_value, estimator), mut vals)| {
            vals.sort_by_key(|v| (v.0, v.1));
            let xs: Vec<f64> = vals.iter().map(|v| v.2).filter(|v| v.is_finite()).collect();
            let n = xs.len();
            let mean = if n == 0 { f64::NAN } else { xs.iter().sum::<f64>() / n as f64 };
            let std = if n < 2 {
                if n == 1 { 0.0 } else { f64::NAN }
            } else {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            };
            Aggregate { metric: metric.into(), sweep_value, estimator: estimator.into(), mean, std, n }
        })
        .collect()
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|source| HawkesError::Io { path: path.into(), source })?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn flush(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|source| HawkesError::Io { path: path.into(), source })
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        v.to_string()
    }
}

/// Raw rows without wall-times, so identical runs give identical files.
pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["estimator", "sweep_value", "graph", "sim", "metric", "value", "status"])?;
    for r in rows {
        w.write_record([
            r.estimator.clone(),
            r.sweep_value.to_string(),
            r.graph.to_string(),
            r.sim.to_string(),
            r.metric.clone(),
            fmt_value(r.value),
            r.status.clone(),
        ])?;
    }
    flush(w, path)
}

/// One line per fit with its wall time and iteration count.
pub fn write_timings(path: &Path, outcomes: &[TaskOutcome], cfg: &super::ExperimentConfig) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["estimator", "sweep_value", "graph", "sim", "wall_time_s", "iterations"])?;
    for o in outcomes {
        let t = o.task;
        let wall = o.rows.first().map_or(f64::NAN, |r| r.wall_time);
        w.write_record([
            cfg.estimators[t.estimator].label(),
            cfg.sweep.values[t.value_idx].to_string(),
            t.graph.to_string(),
            t.sim.to_string(),
            format!("{wall:.6}"),
            o.fit.as_ref().map_or(String::new(), |f| f.iterations.to_string()),
        ])?;
    }
    flush(w, path)
}

fn file_stem(metric: &str) -> String {
    metric.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect()
}

/// Writes `plot_<metric>.csv` files with columns
/// `sweep_value,estimator,mean,std,n`, and returns their paths.
pub fn emit_plot_data(rows: &[ResultRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|source| HawkesError::Io { path: out_dir.into(), source })?;
    let mut by_metric: BTreeMap<String, Vec<Aggregate>> = BTreeMap::new();
    for agg in aggregate(rows) {
        by_metric.entry(agg.metric.clone()).or_default().push(agg);
    }
    let mut paths = Vec::new();
    for (metric, aggs) in by_metric {
        let path = out_dir.join(format!("plot_{}.csv", file_stem(&metric)));
        let mut w = create(&path)?;
        w.write_record(["sweep_value", "estimator", "mean", "std", "n"])?;
        for a in &aggs {
            w.write_record([a.sweep_value.to_string(), a.estimator.clone(), fmt_value(a.mean), fmt_value(a.std), a.n.to_string()])?;
        }
        flush(w, &path)?;
        paths.push(path);
    }
    Ok(paths)
}
