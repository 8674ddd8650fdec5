//! Priors over `(mu, W)` with one scale `alpha` per parameter or group, and
//! the closed-form scale updates that maximize the sampled log-prior.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::model::ModelParams;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuPrior {
    /// Zero-mean Gaussian with variance `alpha_i` per entry.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightPrior {
    /// `p(w) = exp(-|w| / alpha) / (2 alpha)` per entry.
    Laplace,
    /// Zero-mean Gaussian with variance `alpha` per entry.
    Gaussian,
    /// Radial Laplace on the `M` basis weights of each edge:
    /// `p(w_ij) = c * alpha^-M * exp(-||w_ij|| / alpha)`.
    GroupLaplace,
    /// Radial Laplace on each source column `W[., j, .]` (size `D M`).
    ColumnGroupLaplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mu: MuPrior,
    pub weights: WeightPrior,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self { mu: MuPrior::Gaussian, weights: WeightPrior::Laplace }
    }
}

impl PriorSpec {
    pub fn new(weights: WeightPrior) -> Self {
        Self { mu: MuPrior::Gaussian, weights }
    }

    /// Number of weight scales for a `D x D x M` excitation tensor.
    pub fn num_weight_groups(&self, dims: usize, num_basis: usize) -> usize {
        match self.weights {
            WeightPrior::Laplace | WeightPrior::Gaussian => dims * dims * num_basis,
            WeightPrior::GroupLaplace => dims * dims,
            WeightPrior::ColumnGroupLaplace => dims,
        }
    }

    /// Group that flat weight index `k` belongs to.
    #[inline]
    pub fn weight_group(&self, k: usize, dims: usize, num_basis: usize) -> usize {
        match self.weights {
            WeightPrior::Laplace | WeightPrior::Gaussian => k,
            WeightPrior::GroupLaplace => k / num_basis,
            WeightPrior::ColumnGroupLaplace => (k / num_basis) % dims,
        }
    }

    /// Size of each weight group.
    pub fn weight_group_size(&self, dims: usize, num_basis: usize) -> usize {
        match self.weights {
            WeightPrior::Laplace | WeightPrior::Gaussian => 1,
            WeightPrior::GroupLaplace => num_basis,
            WeightPrior::ColumnGroupLaplace => dims * num_basis,
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = match self.weights {
            WeightPrior::Laplace => "laplace",
            WeightPrior::Gaussian => "gaussian",
            WeightPrior::GroupLaplace => "group",
            WeightPrior::ColumnGroupLaplace => "column",
        };
        write!(f, "w={w},mu=gaussian")
    }
}

/// Parses `w=laplace,mu=gaussian`; `w` is one of `laplace`, `gaussian`,
/// `group`, `column`.
impl FromStr for PriorSpec {
    type Err = HawkesError;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = PriorSpec::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| HawkesError::InvalidConfig(format!("prior `{s}`: expected key=value, got `{part}`")))?;
            match (k.trim(), v.trim()) {
                ("w", "laplace") => spec.weights = WeightPrior::Laplace,
                ("w", "gaussian") => spec.weights = WeightPrior::Gaussian,
                ("w", "group") | ("w", "group_laplace") => spec.weights = WeightPrior::GroupLaplace,
                ("w", "column") | ("w", "lowrank") => spec.weights = WeightPrior::ColumnGroupLaplace,
                ("mu", "gaussian") => spec.mu = MuPrior::Gaussian,
                _ => return Err(HawkesError::InvalidConfig(format!("prior `{s}`: unsupported `{part}`"))),
            }
        }
        Ok(spec)
    }
}

/// Prior scales: `mu[i]` for each baseline rate and `weights[g]` for each
/// weight group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub mu: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HyperParams {
    pub fn constant(prior: &PriorSpec, dims: usize, num_basis: usize, value: f64) -> Self {
        Self { mu: vec![value; dims], weights: vec![value; prior.num_weight_groups(dims, num_basis)] }
    }

    pub fn len(&self) -> usize {
        self.mu.len() + self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.iter().chain(&self.weights).any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(HawkesError::InvalidParams("prior scales must be positive and finite".into()));
        }
        Ok(())
    }

    /// Per-edge scale for display: the weight scale of edge `j -> i`
    /// (averaged over bases for per-entry priors).
    pub fn edge_scales(&self, prior: &PriorSpec, dims: usize, num_basis: usize) -> Vec<f64> {
        (0..dims * dims)
            .map(|e| {
                let sum: f64 = (0..num_basis).map(|m| self.weights[prior.weight_group(e * num_basis + m, dims, num_basis)]).sum();
                sum / num_basis as f64
            })
            .collect()
    }
}

/// Log-density of a zero-mean Gaussian with variance `alpha`.
#[inline]
pub fn gaussian_log_density(x: f64, alpha: f64) -> f64 {
    -x * x / (2.0 * alpha) - 0.5 * alpha.ln() - 0.5 * LN_2PI
}

/// Log-density of a Laplace with scale `alpha`.
#[inline]
pub fn laplace_log_density(x: f64, alpha: f64) -> f64 {
    -x.abs() / alpha - (2.0 * alpha).ln()
}

/// Log-density of the radial Laplace `c * alpha^-k * exp(-||v|| / alpha)` on
/// `R^k`, with `c = Gamma(k/2) / (2 pi^{k/2} Gamma(k))` so that it integrates
/// to one. Reduces to the Laplace density for `k = 1`.
pub fn radial_laplace_log_density(norm: f64, alpha: f64, k: usize) -> f64 {
    let kf = k as f64;
    let log_c = libm::lgamma(kf / 2.0) - std::f64::consts::LN_2 - 0.5 * kf * std::f64::consts::PI.ln() - libm::lgamma(kf);
    log_c - kf * alpha.ln() - norm / alpha
}

fn group_norms(prior: &PriorSpec, weights: &[f64], dims: usize, num_basis: usize) -> Vec<f64> {
    let mut sq = vec![0.0; prior.num_weight_groups(dims, num_basis)];
    for (k, w) in weights.iter().enumerate() {
        sq[prior.weight_group(k, dims, num_basis)] += w * w;
    }
    sq.into_iter().map(f64::sqrt).collect()
}

/// `log p_alpha(mu, W)` including every alpha-dependent normalizer.
pub fn log_prior(prior: &PriorSpec, hyper: &HyperParams, params: &ModelParams) -> f64 {
    let (d, nb) = (params.dims(), params.num_basis());
    let mut total: f64 = params.mu.iter().zip(&hyper.mu).map(|(x, a)| gaussian_log_density(*x, *a)).sum();
    total += match prior.weights {
        WeightPrior::Laplace => params.weights.iter().zip(&hyper.weights).map(|(x, a)| laplace_log_density(*x, *a)).sum::<f64>(),
        WeightPrior::Gaussian => params.weights.iter().zip(&hyper.weights).map(|(x, a)| gaussian_log_density(*x, *a)).sum(),
        WeightPrior::GroupLaplace | WeightPrior::ColumnGroupLaplace => {
            let k = prior.weight_group_size(d, nb);
            group_norms(prior, &params.weights, d, nb)
                .iter()
                .zip(&hyper.weights)
                .map(|(n, a)| radial_laplace_log_density(*n, *a, k))
                .sum()
        }
    };
    total
}

/// Adds `d log p_alpha / d theta` to `grad_mu` and `grad_w`.
pub fn add_log_prior_grad(prior: &PriorSpec, hyper: &HyperParams, params: &ModelParams, grad_mu: &mut [f64], grad_w: &mut [f64]) {
    let (d, nb) = (params.dims(), params.num_basis());
    for ((g, x), a) in grad_mu.iter_mut().zip(&params.mu).zip(&hyper.mu) {
        *g -= x / a;
    }
    match prior.weights {
        WeightPrior::Laplace => {
            for ((g, x), a) in grad_w.iter_mut().zip(&params.weights).zip(&hyper.weights) {
                *g -= x.signum() / a;
            }
        }
        WeightPrior::Gaussian => {
            for ((g, x), a) in grad_w.iter_mut().zip(&params.weights).zip(&hyper.weights) {
                *g -= x / a;
            }
        }
        WeightPrior::GroupLaplace | WeightPrior::ColumnGroupLaplace => {
            let norms = group_norms(prior, &params.weights, d, nb);
            for (k, (g, x)) in grad_w.iter_mut().zip(&params.weights).enumerate() {
                let grp = prior.weight_group(k, d, nb);
                if norms[grp] > 0.0 {
                    *g -= x / (norms[grp] * hyper.weights[grp]);
                }
            }
        }
    }
}

/// Maximizer over `alpha` of the average log-prior of the samples:
/// Gaussian `mean x^2`, Laplace `mean |x|`, radial Laplace `mean ||v|| / k`.
pub fn m_step_closed_form(prior: &PriorSpec, samples: &[ModelParams]) -> HyperParams {
    assert!(!samples.is_empty(), "closed-form update needs at least one sample");
    let (d, nb) = (samples[0].dims(), samples[0].num_basis());
    let l = samples.len() as f64;
    let mut mu = vec![0.0; d];
    let mut weights = vec![0.0; prior.num_weight_groups(d, nb)];
    for s in samples {
        for (a, x) in mu.iter_mut().zip(&s.mu) {
            *a += x * x;
        }
        match prior.weights {
            WeightPrior::Laplace => weights.iter_mut().zip(&s.weights).for_each(|(a, x)| *a += x.abs()),
            WeightPrior::Gaussian => weights.iter_mut().zip(&s.weights).for_each(|(a, x)| *a += x * x),
            WeightPrior::GroupLaplace | WeightPrior::ColumnGroupLaplace => {
                let k = prior.weight_group_size(d, nb) as f64;
                for (a, n) in weights.iter_mut().zip(group_norms(prior, &s.weights, d, nb)) {
                    *a += n / k;
                }
            }
        }
    }
    mu.iter_mut().chain(weights.iter_mut()).for_each(|a| *a /= l);
    HyperParams { mu, weights }
}
