//! Penalized maximum likelihood with a single shared penalty strength.
//!
//! Minimizes `-log p(S | mu, W) + R(W)` with `R` built from L1, squared L2
//! and group-lasso terms (groups are the `M` basis weights of one edge).
//! The smooth part is handled by Adam-preconditioned gradient steps, the
//! penalty and the constraint `W >= 0` by a proximal step, and `mu` is
//! optimized through `log mu`. Every accepted iterate decreases the
//! objective; rejected steps halve the step size.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::events::EventSequence;
use crate::kernel::{parse_kv, KernelSpec};
use crate::likelihood::ExcitationFeatures;
use crate::model::ModelParams;
use crate::optim::Adam;

/// Penalty on `W`. Each variant carries its strength `1/alpha >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltySpec {
    None,
    L1(f64),
    L2(f64),
    GroupLasso(f64),
    Composite(Vec<PenaltySpec>),
}

/// Strengths of the three elementary penalties after flattening.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Strengths {
    l1: f64,
    l2: f64,
    group: f64,
}

impl PenaltySpec {
    fn strengths(&self) -> Strengths {
        let mut s = Strengths::default();
        self.accumulate(&mut s);
        s
    }

    fn accumulate(&self, s: &mut Strengths) {
        match self {
            PenaltySpec::None => {}
            PenaltySpec::L1(c) => s.l1 += c,
            PenaltySpec::L2(c) => s.l2 += c,
            PenaltySpec::GroupLasso(c) => s.group += c,
            PenaltySpec::Composite(parts) => parts.iter().for_each(|p| p.accumulate(s)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.strengths();
        let ok = |c: f64| c.is_finite() && c >= 0.0;
        if !(ok(s.l1) && ok(s.l2) && ok(s.group)) {
            return Err(HawkesError::InvalidConfig(format!("penalty strengths must be nonnegative: {self}")));
        }
        Ok(())
    }
}

/// `R(W)` including the strengths.
pub fn penalty_value(pen: &PenaltySpec, params: &ModelParams) -> f64 {
    let s = pen.strengths();
    let mut total = 0.0;
    if s.l1 != 0.0 {
        total += s.l1 * params.weights.iter().map(|w| w.abs()).sum::<f64>();
    }
    if s.l2 != 0.0 {
        total += s.l2 * params.weights.iter().map(|w| w * w).sum::<f64>();
    }
    if s.group != 0.0 {
        total += s.group * group_norms(&params.weights, params.num_basis()).sum::<f64>();
    }
    total
}

fn group_norms(weights: &[f64], nb: usize) -> impl Iterator<Item = f64> + '_ {
    weights.chunks(nb).map(|g| g.iter().map(|w| w * w).sum::<f64>().sqrt())
}

/// Proximal operator of `threshold * ||v||_2`: zero if `||v|| <= threshold`,
/// otherwise the vector shrunk by the factor `1 - threshold / ||v||`.
pub fn prox_group(v: &mut [f64], threshold: f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= threshold {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        let f = 1.0 - threshold / norm;
        v.iter_mut().for_each(|x| *x *= f);
    }
}

/// Prox of `R + indicator(W >= 0)` for one edge group, with per-coordinate
/// step sizes `steps`. The group term uses the mean step of the group.
fn prox_edge(v: &mut [f64], steps: &[f64], s: Strengths) {
    for (x, t) in v.iter_mut().zip(steps) {
        *x = (*x - t * s.l1).max(0.0) / (1.0 + 2.0 * t * s.l2);
    }
    if s.group > 0.0 {
        let t = steps.iter().sum::<f64>() / steps.len() as f64;
        let t2 = steps.iter().map(|t| 1.0 + 2.0 * t * s.l2).sum::<f64>() / steps.len() as f64;
        prox_group(v, t * s.group / t2);
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltySpec::None => write!(f, "none"),
            PenaltySpec::L1(c) => write!(f, "l1:c={c}"),
            PenaltySpec::L2(c) => write!(f, "l2:c={c}"),
            PenaltySpec::GroupLasso(c) => write!(f, "gl:c={c}"),
            PenaltySpec::Composite(parts) => {
                for (k, p) in parts.iter().enumerate() {
                    if k > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `none`, `l1:c=0.1`, `l2:c=0.05`, `gl:c=0.1`, and sums joined by `+`
/// such as `l1:c=0.075+gl:c=0.025`.
impl FromStr for PenaltySpec {
    type Err = HawkesError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('+').map(str::trim).collect();
        if parts.len() > 1 {
            let parsed = parts.iter().map(|p| p.parse()).collect::<Result<Vec<_>>>()?;
            let pen = PenaltySpec::Composite(parsed);
            pen.validate()?;
            return Ok(pen);
        }
        let bad = |msg: &str| HawkesError::InvalidConfig(format!("penalty `{s}`: {msg}"));
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let kv = parse_kv(args).map_err(|e| bad(&e))?;
        let c = kv.iter().find(|(k, _)| *k == "c").map(|(_, v)| *v);
        let pen = match kind.trim() {
            "none" => PenaltySpec::None,
            "l1" => PenaltySpec::L1(c.ok_or_else(|| bad("missing c"))?),
            "l2" => PenaltySpec::L2(c.ok_or_else(|| bad("missing c"))?),
            "gl" => PenaltySpec::GroupLasso(c.ok_or_else(|| bad("missing c"))?),
            other => return Err(bad(&format!("unknown penalty `{other}`"))),
        };
        pen.validate()?;
        Ok(pen)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MleOptions {
    pub learning_rate: f64,
    pub max_iter: usize,
    /// Relative objective change counted as stalled.
    pub tol: f64,
    /// Consecutive stalled iterations before stopping.
    pub patience: usize,
    /// Lower bound on every `mu_i`.
    pub mu_floor: f64,
    /// Keep `W` at its initial value (zero) and fit only `mu`.
    pub freeze_weights: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { learning_rate: 0.02, max_iter: 5000, tol: 1e-7, patience: 20, mu_floor: 1e-10, freeze_weights: false }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: ModelParams,
    /// Penalized negative log-likelihood after each accepted iterate,
    /// starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits `(mu, W)` by penalized maximum likelihood.
pub fn fit_mle(seq: &EventSequence, kernel: &KernelSpec, pen: &PenaltySpec, opts: &MleOptions) -> Result<FitReport> {
    if seq.is_empty() {
        return Err(HawkesError::InvalidSequence("cannot fit an empty sequence".into()));
    }
    pen.validate()?;
    kernel.validate()?;
    let feats = ExcitationFeatures::new(seq, kernel);
    fit_mle_features(&feats, seq, kernel, pen, opts)
}

/// [`fit_mle`] with precomputed features.
pub fn fit_mle_features(
    feats: &ExcitationFeatures,
    seq: &EventSequence,
    kernel: &KernelSpec,
    pen: &PenaltySpec,
    opts: &MleOptions,
) -> Result<FitReport> {
    let d = seq.dims();
    let nb = kernel.num_basis();
    let strengths = pen.strengths();
    let horizon = feats.window();
    let log_floor = opts.mu_floor.ln();

    let counts = seq.counts();
    let mut log_mu: Vec<f64> = counts.iter().map(|&c| (c.max(1) as f64 / (2.0 * horizon)).ln().max(log_floor)).collect();
    let total_mass: f64 = (0..nb).map(|m| kernel.mass(m)).sum();
    let w0 = if opts.freeze_weights { 0.0 } else { 0.5 / (d as f64 * total_mass) };
    let mut weights = vec![w0; d * d * nb];

    let objective = |log_mu: &[f64], weights: &[f64]| -> Result<f64> {
        let mu: Vec<f64> = log_mu.iter().map(|x| x.exp()).collect();
        let ll = feats.log_likelihood(&mu, weights)?;
        let params = ModelParams::from_parts_unchecked(mu, weights.to_vec(), nb);
        Ok(-ll + penalty_value(pen, &params))
    };

    let n_mu = d;
    let n_all = d + weights.len();
    let mut adam = Adam::new(n_all);
    let mut grad = vec![0.0; n_all];
    let mut dir = vec![0.0; n_all];
    let mut scale = vec![0.0; n_all];
    let mut steps = vec![0.0; nb];
    let mut cand_mu = log_mu.clone();
    let mut cand_w = weights.clone();

    let mut current = objective(&log_mu, &weights)?;
    let mut trace = vec![current];
    let mut lr = opts.learning_rate;
    let mut stalled = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut fresh_restart = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let mu: Vec<f64> = log_mu.iter().map(|x| x.exp()).collect();
        let (g_mu, g_w) = grad.split_at_mut(n_mu);
        feats.log_likelihood_grad(&mu, &weights, g_mu, g_w)?;
        // descend on -ll; chain rule through mu = exp(log_mu)
        for (g, m) in g_mu.iter_mut().zip(&mu) {
            *g = -*g * m;
        }
        if opts.freeze_weights {
            g_w.iter_mut().for_each(|g| *g = 0.0);
        } else {
            for g in g_w.iter_mut() {
                *g = -*g;
            }
        }
        adam.observe(&grad);
        adam.direction(&mut dir, &mut scale);
        // momentum can point uphill near a minimum; fall back to the
        // preconditioned gradient then
        if dir.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>() <= 0.0 {
            for ((d, g), s) in dir.iter_mut().zip(&grad).zip(&scale) {
                *d = g * s;
            }
        }

        let mut accepted = false;
        for _ in 0..40 {
            for k in 0..n_mu {
                cand_mu[k] = (log_mu[k] - lr * dir[k]).max(log_floor);
            }
            if !opts.freeze_weights {
                for (e, chunk) in cand_w.chunks_mut(nb).enumerate() {
                    for m in 0..nb {
                        let k = e * nb + m;
                        chunk[m] = weights[k] - lr * dir[n_mu + k];
                        steps[m] = lr * scale[n_mu + k];
                    }
                    prox_edge(chunk, &steps, strengths);
                }
            }
            match objective(&cand_mu, &cand_w) {
                Ok(value) if value <= current => {
                    let rel = (current - value) / current.abs().max(1.0);
                    log_mu.copy_from_slice(&cand_mu);
                    weights.copy_from_slice(&cand_w);
                    current = value;
                    trace.push(value);
                    stalled = if rel < opts.tol { stalled + 1 } else { 0 };
                    accepted = true;
                    break;
                }
                _ => lr *= 0.5,
            }
        }
        if !accepted {
            if fresh_restart {
                converged = true;
                break;
            }
            adam.reset_momentum();
            fresh_restart = true;
            lr = opts.learning_rate;
            continue;
        }
        fresh_restart = false;
        lr = (lr * 1.25).min(opts.learning_rate);
        if stalled >= opts.patience {
            converged = true;
            break;
        }
    }

    let mu = log_mu.iter().map(|x| x.exp()).collect();
    Ok(FitReport { params: ModelParams::new(mu, weights, nb)?, objective_trace: trace, iterations, converged })
}
