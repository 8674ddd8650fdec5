//! Edge-recovery and predictive metrics.
//!
//! All graph metrics work on aggregated edge weights `w_ij = sum_m w_ij^m`
//! laid out row-major (`[i * D + j]` is the edge `j -> i`). Self-pairs are
//! counted unless [`MetricOptions::exclude_self_loops`] is set.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::events::{Event, EventSequence};
use crate::kernel::{parse_kv, KernelSpec};
use crate::likelihood::window_log_likelihood;
use crate::model::ModelParams;
use crate::simulate::GroundTruth;
use crate::vi::VariationalState;

pub const DEFAULT_ETA: f64 = 0.04;
pub const DEFAULT_TOP_K: usize = 20;

/// Point estimate of the edge weights, with per-edge posterior stds when the
/// estimator provides them.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeEstimate {
    pub dims: usize,
    pub weights: Vec<f64>,
    pub stds: Option<Vec<f64>>,
}

impl EdgeEstimate {
    pub fn new(dims: usize, weights: Vec<f64>, stds: Option<Vec<f64>>) -> Result<Self> {
        let n = dims * dims;
        if weights.len() != n || stds.as_ref().is_some_and(|s| s.len() != n) {
            return Err(HawkesError::InvalidParams(format!("edge estimate must be {dims}x{dims}")));
        }
        if weights.iter().chain(stds.iter().flatten()).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(HawkesError::InvalidParams("edge weights and stds must be finite and nonnegative".into()));
        }
        Ok(Self { dims, weights, stds })
    }

    /// Point estimate without uncertainty.
    pub fn from_params(params: &ModelParams) -> Self {
        Self { dims: params.dims(), weights: params.edge_weights(), stds: None }
    }

    /// Posterior mode as the point estimate, stds aggregated over bases as
    /// `sqrt(sum_m std_ijm^2)`.
    pub fn from_posterior(state: &VariationalState) -> Self {
        Self {
            dims: state.dims,
            weights: state.posterior_mode().edge_weights(),
            stds: Some(state.posterior_std().edge_stds()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricOptions {
    pub exclude_self_loops: bool,
}

fn pairs(dims: usize, opts: MetricOptions) -> impl Iterator<Item = usize> {
    (0..dims * dims).filter(move |k| !(opts.exclude_self_loops && k / dims == k % dims))
}

fn check_dims(est: &EdgeEstimate, truth: &GroundTruth) {
    assert_eq!(est.dims, truth.dims(), "estimate and truth disagree on D");
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Confusion {
    tp: usize,
    fp: usize,
    tn: usize,
    fn_: usize,
}

fn confusion(est: &EdgeEstimate, truth: &GroundTruth, eta: f64, opts: MetricOptions) -> Confusion {
    check_dims(est, truth);
    assert!(eta >= 0.0, "threshold must be nonnegative");
    let mut c = Confusion::default();
    for k in pairs(est.dims, opts) {
        match (est.weights[k] > eta, truth.adjacency[k]) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// F1 score of thresholded recovery. Zero when there are no true positives.
pub fn f1_score(est: &EdgeEstimate, truth: &GroundTruth, eta: f64) -> f64 {
    f1_score_with(est, truth, eta, MetricOptions::default())
}

pub fn f1_score_with(est: &EdgeEstimate, truth: &GroundTruth, eta: f64, opts: MetricOptions) -> f64 {
    let c = confusion(est, truth, eta, opts);
    if c.tp == 0 {
        return 0.0;
    }
    2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64
}

/// Fraction of true edges among the `k` top-ranked pairs. Without stds pairs
/// are ranked by decreasing weight, with stds by increasing `std / weight`.
/// Ties fall back to row-major pair order.
pub fn precision_at_k(est: &EdgeEstimate, truth: &GroundTruth, k: usize) -> f64 {
    precision_at_k_with(est, truth, k, MetricOptions::default())
}

pub fn precision_at_k_with(est: &EdgeEstimate, truth: &GroundTruth, k: usize, opts: MetricOptions) -> f64 {
    check_dims(est, truth);
    let mut order: Vec<usize> = pairs(est.dims, opts).collect();
    assert!(k >= 1 && k <= order.len(), "k = {k} must lie in [1, {}]", order.len());
    let key = |p: usize| match &est.stds {
        Some(s) => ratio(s[p], est.weights[p]),
        None => -est.weights[p],
    };
    order.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    order[..k].iter().filter(|&&p| truth.adjacency[p]).count() as f64 / k as f64
}

/// `std / weight`, with a zero weight ranked last.
fn ratio(std: f64, weight: f64) -> f64 {
    if weight > 0.0 {
        std / weight
    } else {
        f64::INFINITY
    }
}

/// Mean over pairs of `|w - w*| / w*` on true edges and `w / min w*` on
/// non-edges.
pub fn relative_error(est: &EdgeEstimate, truth: &GroundTruth) -> Result<f64> {
    relative_error_with(est, truth, MetricOptions::default())
}

pub fn relative_error_with(est: &EdgeEstimate, truth: &GroundTruth, opts: MetricOptions) -> Result<f64> {
    check_dims(est, truth);
    let w_true = truth.edge_weights();
    let min_pos = pairs(est.dims, opts)
        .map(|k| w_true[k])
        .filter(|w| *w > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_pos.is_finite() {
        return Err(HawkesError::DegenerateTruth);
    }
    let (mut total, mut n) = (0.0, 0usize);
    for k in pairs(est.dims, opts) {
        let w = w_true[k];
        total += if w > 0.0 { (est.weights[k] - w).abs() / w } else { est.weights[k] / min_pos };
        n += 1;
    }
    Ok(total / n as f64)
}

/// False-positive and false-negative rates; `None` when the corresponding
/// denominator is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

pub fn fpr_fnr(est: &EdgeEstimate, truth: &GroundTruth, eta: f64) -> ErrorRates {
    fpr_fnr_with(est, truth, eta, MetricOptions::default())
}

pub fn fpr_fnr_with(est: &EdgeEstimate, truth: &GroundTruth, eta: f64, opts: MetricOptions) -> ErrorRates {
    let c = confusion(est, truth, eta, opts);
    let frac = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    ErrorRates { fpr: frac(c.fp, c.fp + c.tn), fnr: frac(c.fn_, c.fn_ + c.tp) }
}

/// Log-likelihood of the test window `[train.horizon(), test.horizon())`
/// conditioned on the whole preceding history, divided by the number of
/// test events.
pub fn predictive_loglik(
    model: &ModelParams,
    kernel: &KernelSpec,
    train: &EventSequence,
    test: &EventSequence,
) -> Result<f64> {
    if test.is_empty() {
        return Err(HawkesError::EmptySplit { side: "test" });
    }
    if train.dims() != test.dims() {
        return Err(HawkesError::InvalidSequence("train and test have different D".into()));
    }
    let start = train.horizon();
    if test.events()[0].time < start || test.horizon() <= start {
        return Err(HawkesError::InvalidSequence(format!("test events must lie after the training horizon {start}")));
    }
    let events: Vec<Event> = train.events().iter().chain(test.events()).copied().collect();
    let full = EventSequence::new(events, test.horizon(), test.dims())?;
    Ok(window_log_likelihood(model, kernel, &full, start, test.horizon())? / test.len() as f64)
}

/// A metric selector as written on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum MetricSpec {
    F1 { eta: f64 },
    PrecisionAtK { k: usize },
    RelativeError,
    FprFnr { eta: f64 },
}

impl MetricSpec {
    /// Default selection used by the harness and the CLI.
    pub fn defaults() -> Vec<MetricSpec> {
        vec![
            MetricSpec::F1 { eta: DEFAULT_ETA },
            MetricSpec::PrecisionAtK { k: DEFAULT_TOP_K },
            MetricSpec::RelativeError,
            MetricSpec::FprFnr { eta: DEFAULT_ETA },
        ]
    }

    /// Evaluates the metric as `(name, value)` pairs; `fprfnr` yields two.
    /// Undefined values are reported as NaN. `k` is clamped to the number of
    /// pairs.
    pub fn evaluate(&self, est: &EdgeEstimate, truth: &GroundTruth, opts: MetricOptions) -> Result<Vec<(String, f64)>> {
        Ok(match *self {
            MetricSpec::F1 { eta } => vec![(self.to_string(), f1_score_with(est, truth, eta, opts))],
            MetricSpec::PrecisionAtK { k } => {
                let n = pairs(est.dims, opts).count();
                vec![(self.to_string(), precision_at_k_with(est, truth, k.clamp(1, n), opts))]
            }
            MetricSpec::RelativeError => vec![(self.to_string(), relative_error_with(est, truth, opts)?)],
            MetricSpec::FprFnr { eta } => {
                let r = fpr_fnr_with(est, truth, eta, opts);
                vec![(format!("fpr:eta={eta}"), r.fpr.unwrap_or(f64::NAN)), (format!("fnr:eta={eta}"), r.fnr.unwrap_or(f64::NAN))]
            }
        })
    }

    /// Parses a comma-separated list such as `f1:eta=0.04,prec@20,relerr`.
    pub fn parse_list(s: &str) -> std::result::Result<Vec<MetricSpec>, String> {
        s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricSpec::F1 { eta } => write!(f, "f1:eta={eta}"),
            MetricSpec::PrecisionAtK { k } => write!(f, "prec@{k}"),
            MetricSpec::RelativeError => write!(f, "relerr"),
            MetricSpec::FprFnr { eta } => write!(f, "fprfnr:eta={eta}"),
        }
    }
}

impl FromStr for MetricSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (head, args) = s.split_once(':').unwrap_or((s, ""));
        let eta = || -> std::result::Result<f64, String> {
            let mut eta = DEFAULT_ETA;
            for (key, v) in parse_kv(args)? {
                match key {
                    "eta" if v >= 0.0 => eta = v,
                    "eta" => return Err(format!("eta must be nonnegative, got {v}")),
                    _ => return Err(format!("unknown metric argument `{key}`")),
                }
            }
            Ok(eta)
        };
        match head {
            "f1" => Ok(MetricSpec::F1 { eta: eta()? }),
            "fprfnr" => Ok(MetricSpec::FprFnr { eta: eta()? }),
            "relerr" if args.is_empty() => Ok(MetricSpec::RelativeError),
            h if h.starts_with("prec@") => {
                let k: usize = h[5..].parse().map_err(|_| format!("bad k in `{s}`"))?;
                if k == 0 {
                    return Err("precision@k needs k >= 1".into());
                }
                Ok(MetricSpec::PrecisionAtK { k })
            }
            _ => Err(format!("unknown metric `{s}`")),
        }
    }
}
