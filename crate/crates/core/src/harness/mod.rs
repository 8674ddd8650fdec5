//! Config-driven experiment sweeps.
//!
//! A sweep expands into independent tasks, one per
//! `(sweep value, graph, simulation, estimator)`. Every task derives its
//! randomness from the experiment seed through [`child_seed`], so tasks can
//! run in any order on any number of threads and still produce the same
//! rows. Rows are sorted before they are returned.

mod config;
mod output;

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use crate::error::{HawkesError, Result};
use crate::events::{Event, EventSequence};
use crate::io::load_events;
use crate::kernel::KernelSpec;
use crate::metrics::{predictive_loglik, EdgeEstimate, MetricOptions};
use crate::mle::fit_mle;
use crate::model::{branching_matrix, spectral_radius, ModelParams};
use crate::simulate::{child_seed, rng_from_seed, sample_graph, simulate, GroundTruth, StopRule, SyntheticConfig};
use crate::vi::{fit_vi, HyperParams, VariationalState};

pub use config::{
    default_cutoff, DataSource, EstimatorConfig, EstimatorKind, ExperimentConfig, Replications, SweepAxis, SweepConfig,
    DEFAULT_L1, DEFAULT_SGLP_GROUP, DEFAULT_SGLP_L1,
};
pub use output::{aggregate, emit_plot_data, write_results, write_timings, Aggregate};

/// Environment variable consulted for the default worker count.
pub const THREADS_ENV: &str = "HAWKES_THREADS";

/// Name of the held-out predictive log-likelihood metric.
pub const PREDICTIVE_METRIC: &str = "pred_ll";

/// Attempts at drawing a stable graph before giving up.
const MAX_GRAPH_DRAWS: u64 = 1000;

/// One raw measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub estimator: String,
    pub sweep_value: usize,
    pub graph: usize,
    pub sim: usize,
    pub metric: String,
    /// NaN when the metric is undefined or the fit failed.
    pub value: f64,
    /// `ok`, or the error that made the task fail.
    pub status: String,
    pub wall_time: f64,
}

/// Coordinates of one unit of work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Task {
    pub value_idx: usize,
    pub graph: usize,
    pub sim: usize,
    pub estimator: usize,
}

/// A fitted model in a form every metric understands.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub kernel: KernelSpec,
    /// Point estimate (the posterior mode for variational fits).
    pub params: ModelParams,
    pub posterior: Option<VariationalState>,
    pub hyper: Option<HyperParams>,
    pub iterations: usize,
}

impl FittedModel {
    pub fn edge_estimate(&self) -> EdgeEstimate {
        match &self.posterior {
            Some(state) => EdgeEstimate::from_posterior(state),
            None => EdgeEstimate::from_params(&self.params),
        }
    }
}

/// Everything one task produced.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub task: Task,
    pub rows: Vec<ResultRow>,
    pub fit: Option<FittedModel>,
    pub truth: Option<GroundTruth>,
}

/// Data for one `(sweep value, graph, sim)` cell.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub truth: Option<GroundTruth>,
    pub full: EventSequence,
    pub train: EventSequence,
    pub test: Option<EventSequence>,
}

/// Splits off the first `ceil(fraction * N)` events for training. The
/// training horizon sits halfway between the last training event and the
/// first test event, so both parts stay valid half-open windows.
pub fn split_train_test(seq: &EventSequence, fraction: f64) -> Result<(EventSequence, EventSequence)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HawkesError::InvalidConfig(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let n = seq.len();
    // guard against 0.7 * 10 = 7.000000000000001
    let k = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if k == 0 {
        return Err(HawkesError::EmptySplit { side: "train" });
    }
    if k >= n {
        return Err(HawkesError::EmptySplit { side: "test" });
    }
    let events = seq.events();
    let t_split = 0.5 * (events[k - 1].time + events[k].time);
    let train = EventSequence::new(events[..k].to_vec(), t_split, seq.dims())?;
    let test = EventSequence::new(events[k..].to_vec(), seq.horizon(), seq.dims())?;
    Ok((train, test))
}

/// Draws an Erdos-Renyi graph, redrawing until the branching matrix has
/// spectral radius below one.
pub fn stable_graph(cfg: &SyntheticConfig, seed: u64) -> Result<GroundTruth> {
    for attempt in 0..MAX_GRAPH_DRAWS {
        let mut rng = rng_from_seed(child_seed(seed, &[attempt]));
        let truth = sample_graph(cfg, &mut rng)?;
        let g = branching_matrix(&truth.params, &cfg.kernel);
        if spectral_radius(&g, cfg.dims) < 1.0 {
            return Ok(truth);
        }
    }
    Err(HawkesError::InvalidConfig(format!("no stable graph in {MAX_GRAPH_DRAWS} draws; lower the weights")))
}

fn sweep_events(cfg: &ExperimentConfig, value: usize) -> Option<usize> {
    match (cfg.sweep.axis, &cfg.data) {
        (SweepAxis::NEvents, _) => Some(value),
        (_, DataSource::Synthetic { n_events, .. }) => *n_events,
        (_, DataSource::Dataset { .. }) => None,
    }
}

/// Generates (or loads) the data of one cell. Graph `g` and simulation `r`
/// use the same seeds for every sweep value, so an event-count sweep sees
/// nested prefixes of the same sequence.
pub fn task_data(cfg: &ExperimentConfig, value_idx: usize, graph: usize, sim: usize) -> Result<TaskData> {
    let value = cfg.sweep.values[value_idx];
    let (truth, full) = match &cfg.data {
        DataSource::Synthetic { dims, edge_prob, mu_range, weight_range, decay, .. } => {
            let n = sweep_events(cfg, value).expect("validated config");
            let syn = SyntheticConfig {
                dims: *dims,
                edge_prob: *edge_prob,
                mu_range: *mu_range,
                weight_range: *weight_range,
                kernel: KernelSpec::exponential(*decay)?,
                stop: StopRule::Events(n),
                seed: cfg.seed,
            };
            syn.validate()?;
            let truth = stable_graph(&syn, child_seed(cfg.seed, &[0, graph as u64]))?;
            let mut rng = rng_from_seed(child_seed(cfg.seed, &[1, graph as u64, sim as u64]));
            let seq = simulate(&truth, &syn.kernel, syn.stop, &mut rng)?;
            (Some(truth), seq)
        }
        DataSource::Dataset { path } => {
            let seq = load_events(path)?;
            let seq = match sweep_events(cfg, value) {
                Some(n) if n < seq.len() => truncate(&seq, n)?,
                _ => seq,
            };
            (None, seq)
        }
    };
    let (train, test) = match cfg.split_fraction {
        Some(f) => {
            let (a, b) = split_train_test(&full, f)?;
            (a, Some(b))
        }
        None => (full.clone(), None),
    };
    Ok(TaskData { truth, full, train, test })
}

fn truncate(seq: &EventSequence, n: usize) -> Result<EventSequence> {
    let events: Vec<Event> = seq.events()[..n].to_vec();
    let horizon = if n < seq.len() { 0.5 * (events[n - 1].time + seq.events()[n].time) } else { seq.horizon() };
    EventSequence::new(events, horizon, seq.dims())
}

/// Fits one estimator on `train`. `basis` overrides the estimator's `M`.
pub fn fit_estimator(est: &EstimatorConfig, train: &EventSequence, basis: Option<usize>, seed: u64) -> Result<FittedModel> {
    let kernel = est.kernel(basis)?;
    if est.kind.is_variational() {
        let prior = est.prior_spec()?;
        let em = crate::vi::EmConfig { seed, ..est.em.clone() };
        let fit = fit_vi(train, &kernel, &prior, &em)?;
        let iterations = fit.elbo_steps.len();
        Ok(FittedModel {
            params: fit.posterior_mode(),
            posterior: Some(fit.state),
            hyper: Some(fit.hyper),
            kernel,
            iterations,
        })
    } else {
        let report = fit_mle(train, &kernel, &est.penalty_spec()?, &est.mle)?;
        Ok(FittedModel { params: report.params, posterior: None, hyper: None, kernel, iterations: report.iterations })
    }
}

/// Metric names a task reports, in emission order.
pub fn metric_names(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let mut names = Vec::new();
    if matches!(cfg.data, DataSource::Synthetic { .. }) {
        for spec in cfg.metric_specs()? {
            match spec {
                crate::metrics::MetricSpec::FprFnr { eta } => {
                    names.push(format!("fpr:eta={eta}"));
                    names.push(format!("fnr:eta={eta}"));
                }
                other => names.push(other.to_string()),
            }
        }
    }
    if cfg.split_fraction.is_some() {
        names.push(PREDICTIVE_METRIC.to_string());
    }
    Ok(names)
}

/// All tasks of a sweep, in canonical order.
pub fn tasks(cfg: &ExperimentConfig) -> Vec<Task> {
    let mut out = Vec::new();
    for value_idx in 0..cfg.sweep.values.len() {
        for graph in 0..cfg.replications.graphs {
            for sim in 0..cfg.replications.sims {
                for estimator in 0..cfg.estimators.len() {
                    out.push(Task { value_idx, graph, sim, estimator });
                }
            }
        }
    }
    out
}

fn evaluate(cfg: &ExperimentConfig, data: &TaskData, fit: &FittedModel) -> Result<Vec<(String, f64)>> {
    let mut values = Vec::new();
    if let Some(truth) = &data.truth {
        let est = fit.edge_estimate();
        let opts = MetricOptions { exclude_self_loops: cfg.exclude_self_loops };
        for spec in cfg.metric_specs()? {
            values.extend(spec.evaluate(&est, truth, opts)?);
        }
    }
    if let Some(test) = &data.test {
        values.push((PREDICTIVE_METRIC.to_string(), predictive_loglik(&fit.params, &fit.kernel, &data.train, test)?));
    }
    Ok(values)
}

/// Runs one task: data, fit, metrics. Failures become rows with NaN values
/// and the error in `status`.
pub fn run_task(cfg: &ExperimentConfig, task: Task) -> TaskOutcome {
    let est = &cfg.estimators[task.estimator];
    let value = cfg.sweep.values[task.value_idx];
    let basis = (cfg.sweep.axis == SweepAxis::Basis).then_some(value);
    let seed = child_seed(cfg.seed, &[2, task.graph as u64, task.sim as u64, task.estimator as u64]);
    let row = |metric: String, value_: f64, status: String, wall: f64| ResultRow {
        estimator: est.label(),
        sweep_value: value,
        graph: task.graph,
        sim: task.sim,
        metric,
        value: value_,
        status,
        wall_time: wall,
    };
    let start = Instant::now();
    let data = task_data(cfg, task.value_idx, task.graph, task.sim);
    let result = data.and_then(|data| {
        let fit = fit_estimator(est, &data.train, basis, seed)?;
        let wall = start.elapsed().as_secs_f64();
        let values = evaluate(cfg, &data, &fit)?;
        Ok((data, fit, values, wall))
    });
    match result {
        Ok((data, fit, values, wall)) => {
            let rows = values.into_iter().map(|(m, v)| row(m, v, "ok".into(), wall)).collect();
            TaskOutcome { task, rows, fit: Some(fit), truth: data.truth }
        }
        Err(e) => {
            warn!("task {task:?} ({}) failed: {e}", est.label());
            let wall = start.elapsed().as_secs_f64();
            let names = metric_names(cfg).unwrap_or_default();
            let rows = names.into_iter().map(|m| row(m, f64::NAN, format!("error: {e}"), wall)).collect();
            TaskOutcome { task, rows, fit: None, truth: None }
        }
    }
}

/// Worker count from the config, `HAWKES_THREADS`, or the machine.
pub fn thread_count(cfg: &ExperimentConfig) -> usize {
    cfg.threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()).filter(|n| *n > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every task and returns the outcomes in canonical task order.
pub fn run_tasks(cfg: &ExperimentConfig) -> Result<Vec<TaskOutcome>> {
    cfg.validate()?;
    let all = tasks(cfg);
    let threads = thread_count(cfg);
    info!("running {} tasks on {threads} threads", all.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HawkesError::InvalidConfig(format!("thread pool: {e}")))?;
    let mut outcomes: Vec<TaskOutcome> = pool.install(|| all.par_iter().map(|t| run_task(cfg, *t)).collect());
    outcomes.sort_by_key(|o| o.task);
    Ok(outcomes)
}

/// Runs the sweep and returns raw rows sorted by
/// `(metric, sweep value, estimator, graph, sim)`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let mut rows: Vec<ResultRow> = run_tasks(cfg)?.into_iter().flat_map(|o| o.rows).collect();
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (&a.metric, a.sweep_value, &a.estimator, a.graph, a.sim).cmp(&(&b.metric, b.sweep_value, &b.estimator, b.graph, b.sim))
    });
}
