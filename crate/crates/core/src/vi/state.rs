//! Mean-field log-normal posterior over every entry of `(mu, W)`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::model::ModelParams;

/// Location `gamma_mu` and log-scale `gamma_sigma` of `log theta` for each
/// parameter, laid out as `[mu (D), W (D*D*M)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub dims: usize,
    pub num_basis: usize,
    pub gamma_mu: Vec<f64>,
    pub gamma_sigma: Vec<f64>,
}

/// Random initialization of the variational parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitSettings {
    pub location_mean: f64,
    pub location_std: f64,
    pub log_scale_mean: f64,
    pub log_scale_std: f64,
    /// Clip range for the initial log-scales.
    pub log_scale_clip: (f64, f64),
    /// Initial value of every prior scale.
    pub alpha: f64,
}

impl Default for InitSettings {
    fn default() -> Self {
        Self {
            location_mean: 0.1,
            location_std: 0.1,
            log_scale_mean: 0.2,
            log_scale_std: 0.1,
            log_scale_clip: (0.01, 2.0),
            alpha: 0.1,
        }
    }
}

impl VariationalState {
    pub fn new(dims: usize, num_basis: usize, gamma_mu: Vec<f64>, gamma_sigma: Vec<f64>) -> Result<Self> {
        let n = dims + dims * dims * num_basis;
        if gamma_mu.len() != n || gamma_sigma.len() != n {
            return Err(HawkesError::InvalidParams(format!("variational state needs {n} entries per array")));
        }
        if gamma_mu.iter().chain(&gamma_sigma).any(|x| !x.is_finite()) {
            return Err(HawkesError::InvalidParams("variational parameters must be finite".into()));
        }
        Ok(Self { dims, num_basis, gamma_mu, gamma_sigma })
    }

    pub fn init<R: Rng + ?Sized>(dims: usize, num_basis: usize, init: &InitSettings, rng: &mut R) -> Result<Self> {
        let n = dims + dims * dims * num_basis;
        let loc = Normal::new(init.location_mean, init.location_std)
            .map_err(|e| HawkesError::InvalidConfig(format!("location init: {e}")))?;
        let scale = Normal::new(init.log_scale_mean, init.log_scale_std)
            .map_err(|e| HawkesError::InvalidConfig(format!("log-scale init: {e}")))?;
        let gamma_mu = (0..n).map(|_| loc.sample(rng)).collect();
        let (lo, hi) = init.log_scale_clip;
        let gamma_sigma = (0..n).map(|_| scale.sample(rng).clamp(lo, hi)).collect();
        Self::new(dims, num_basis, gamma_mu, gamma_sigma)
    }

    /// Number of variational coordinates per array, `D + D^2 M`.
    pub fn len(&self) -> usize {
        self.gamma_mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma_mu.is_empty()
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.len()).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn split(&self, flat: Vec<f64>) -> ModelParams {
        let mut mu = flat;
        let weights = mu.split_off(self.dims);
        ModelParams::from_parts_unchecked(mu, weights, self.num_basis)
    }

    /// `theta = exp(gamma_mu + exp(gamma_sigma) * eps)`, elementwise.
    pub fn reparam_sample(&self, eps: &[f64]) -> ModelParams {
        assert_eq!(eps.len(), self.len(), "noise has the wrong shape");
        let flat = self
            .gamma_mu
            .iter()
            .zip(&self.gamma_sigma)
            .zip(eps)
            .map(|((m, s), e)| (m + s.exp() * e).exp())
            .collect();
        self.split(flat)
    }

    /// Log-normal mode `exp(gamma_mu - exp(2 gamma_sigma))`.
    pub fn posterior_mode(&self) -> ModelParams {
        let flat = self
            .gamma_mu
            .iter()
            .zip(&self.gamma_sigma)
            .map(|(m, s)| (m - (2.0 * s).exp()).exp())
            .collect();
        self.split(flat)
    }

    /// Log-normal median `exp(gamma_mu)`.
    pub fn posterior_median(&self) -> ModelParams {
        self.split(self.gamma_mu.iter().map(|m| m.exp()).collect())
    }

    /// Log-normal mean `exp(gamma_mu + s^2 / 2)`.
    pub fn posterior_mean(&self) -> ModelParams {
        let flat = self
            .gamma_mu
            .iter()
            .zip(&self.gamma_sigma)
            .map(|(m, s)| (m + 0.5 * (2.0 * s).exp()).exp())
            .collect();
        self.split(flat)
    }

    /// Log-normal standard deviation `sqrt(exp(s^2) - 1) * exp(gamma_mu + s^2 / 2)`.
    pub fn posterior_std(&self) -> PosteriorStd {
        let mut mu: Vec<f64> = self
            .gamma_mu
            .iter()
            .zip(&self.gamma_sigma)
            .map(|(m, s)| {
                let s2 = (2.0 * s).exp();
                s2.exp_m1().sqrt() * (m + 0.5 * s2).exp()
            })
            .collect();
        let weights = mu.split_off(self.dims);
        PosteriorStd { dims: self.dims, num_basis: self.num_basis, mu, weights }
    }
}

/// Posterior standard deviations, same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorStd {
    pub dims: usize,
    pub num_basis: usize,
    pub mu: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PosteriorStd {
    /// Per-edge std `sqrt(sum_m std_ijm^2)`, row-major `D x D`.
    pub fn edge_stds(&self) -> Vec<f64> {
        self.weights.chunks(self.num_basis).map(|c| c.iter().map(|s| s * s).sum::<f64>().sqrt()).collect()
    }
}
