//! Variational EM for multivariate Hawkes processes.
//!
//! The E-step runs stochastic gradient ascent on a reparameterized
//! Monte-Carlo estimate of the ELBO,
//!
//! ```text
//! ELBO ~ 1/L sum_l [log p(S | theta_l) + log p_alpha(theta_l)] + sum_k (gamma_mu_k + gamma_sigma_k)
//! theta_l = exp(gamma_mu + exp(gamma_sigma) * eps_l),   eps_l ~ N(0, I)
//! ```
//!
//! where the last sum is the log-normal entropy up to a constant. The M-step
//! draws fresh noise, computes the closed-form maximizer of the sampled
//! log-prior over the scales `alpha`, and blends it into the current scales
//! with momentum `beta`.

mod prior;
mod state;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::events::EventSequence;
use crate::kernel::KernelSpec;
use crate::likelihood::ExcitationFeatures;
use crate::model::ModelParams;
use crate::optim::Adam;
use crate::simulate::rng_from_seed;

pub use prior::{
    add_log_prior_grad, gaussian_log_density, laplace_log_density, log_prior, m_step_closed_form,
    radial_laplace_log_density, HyperParams, MuPrior, PriorSpec, WeightPrior,
};
pub use state::{InitSettings, PosteriorStd, VariationalState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Monte-Carlo samples per gradient and per M-step (`L`).
    pub samples: usize,
    /// Momentum of the scale update (`beta`).
    pub momentum: f64,
    /// E-step iterations per EM round (`T_E`).
    pub e_steps: usize,
    /// EM rounds (`T_EM`).
    pub em_rounds: usize,
    /// Adam learning rate (`eta`).
    pub learning_rate: f64,
    /// Multiplicative learning-rate factor applied after every E-step iteration.
    pub lr_decay: f64,
    pub seed: u64,
    pub init: InitSettings,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            samples: 1,
            momentum: 0.5,
            e_steps: 100,
            em_rounds: 100,
            learning_rate: 0.02,
            lr_decay: 1.0 - 1e-4,
            seed: 0,
            init: InitSettings::default(),
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(HawkesError::InvalidConfig("need at least one Monte-Carlo sample".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(HawkesError::InvalidConfig(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(HawkesError::InvalidConfig(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(HawkesError::InvalidConfig(format!("lr decay must lie in (0, 1], got {}", self.lr_decay)));
        }
        Ok(())
    }
}

/// Value and gradient of the per-sample objective
/// `f(gamma) = log p(S | g(eps)) + log p_alpha(g(eps)) + sum(gamma_mu + gamma_sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleObjective {
    pub value: f64,
    pub grad_mu: Vec<f64>,
    pub grad_sigma: Vec<f64>,
}

/// Scratch buffers reused across gradient evaluations.
struct Workspace {
    g_mu: Vec<f64>,
    g_w: Vec<f64>,
}

impl Workspace {
    fn new(state: &VariationalState) -> Self {
        Self { g_mu: vec![0.0; state.dims], g_w: vec![0.0; state.len() - state.dims] }
    }
}

/// Joint term `log p(S | theta) + log p_alpha(theta)` at `theta = g(eps)`,
/// with its gradient chained back to `(gamma_mu, gamma_sigma)` and added to
/// the accumulators. `feats = None` drops the likelihood.
fn accumulate_joint(
    state: &VariationalState,
    prior: &PriorSpec,
    hyper: &HyperParams,
    feats: Option<&ExcitationFeatures>,
    eps: &[f64],
    ws: &mut Workspace,
    acc_mu: &mut [f64],
    acc_sigma: &mut [f64],
) -> Result<f64> {
    let theta = state.reparam_sample(eps);
    let mut value = match feats {
        Some(f) => f.log_likelihood_grad(&theta.mu, &theta.weights, &mut ws.g_mu, &mut ws.g_w)?,
        None => {
            ws.g_mu.iter_mut().chain(ws.g_w.iter_mut()).for_each(|g| *g = 0.0);
            0.0
        }
    };
    value += log_prior(prior, hyper, &theta);
    add_log_prior_grad(prior, hyper, &theta, &mut ws.g_mu, &mut ws.g_w);
    let d = state.dims;
    for k in 0..state.len() {
        let (x, g) = if k < d { (theta.mu[k], ws.g_mu[k]) } else { (theta.weights[k - d], ws.g_w[k - d]) };
        let dtheta = x * g;
        acc_mu[k] += dtheta;
        acc_sigma[k] += dtheta * eps[k] * state.gamma_sigma[k].exp();
    }
    Ok(value)
}

fn entropy_term(state: &VariationalState) -> f64 {
    state.gamma_mu.iter().sum::<f64>() + state.gamma_sigma.iter().sum::<f64>()
}

/// Per-sample objective averaged over the given noise draws, with gradient.
pub fn sample_objective(
    state: &VariationalState,
    prior: &PriorSpec,
    hyper: &HyperParams,
    feats: &ExcitationFeatures,
    eps_samples: &[Vec<f64>],
) -> Result<SampleObjective> {
    objective_impl(state, prior, hyper, Some(feats), eps_samples)
}

fn objective_impl(
    state: &VariationalState,
    prior: &PriorSpec,
    hyper: &HyperParams,
    feats: Option<&ExcitationFeatures>,
    eps_samples: &[Vec<f64>],
) -> Result<SampleObjective> {
    assert!(!eps_samples.is_empty(), "need at least one noise draw");
    let n = state.len();
    let mut grad_mu = vec![0.0; n];
    let mut grad_sigma = vec![0.0; n];
    let mut ws = Workspace::new(state);
    let mut value = 0.0;
    for eps in eps_samples {
        value += accumulate_joint(state, prior, hyper, feats, eps, &mut ws, &mut grad_mu, &mut grad_sigma)?;
    }
    let l = eps_samples.len() as f64;
    value /= l;
    for (gm, gs) in grad_mu.iter_mut().zip(&mut grad_sigma) {
        *gm = *gm / l + 1.0;
        *gs = *gs / l + 1.0;
    }
    Ok(SampleObjective { value: value + entropy_term(state), grad_mu, grad_sigma })
}

/// Monte-Carlo ELBO estimate from precomputed features.
pub fn elbo_estimate_features(
    state: &VariationalState,
    prior: &PriorSpec,
    hyper: &HyperParams,
    feats: &ExcitationFeatures,
    eps_samples: &[Vec<f64>],
) -> Result<f64> {
    assert!(!eps_samples.is_empty(), "need at least one noise draw");
    let mut total = 0.0;
    for eps in eps_samples {
        let theta = state.reparam_sample(eps);
        total += feats.log_likelihood(&theta.mu, &theta.weights)? + log_prior(prior, hyper, &theta);
    }
    Ok(total / eps_samples.len() as f64 + entropy_term(state))
}

/// Monte-Carlo ELBO estimate over the noise draws `eps_samples`.
pub fn elbo_estimate(
    state: &VariationalState,
    prior: &PriorSpec,
    hyper: &HyperParams,
    seq: &EventSequence,
    kernel: &KernelSpec,
    eps_samples: &[Vec<f64>],
) -> Result<f64> {
    check_shapes(state, seq, kernel)?;
    elbo_estimate_features(state, prior, hyper, &ExcitationFeatures::new(seq, kernel), eps_samples)
}

fn check_shapes(state: &VariationalState, seq: &EventSequence, kernel: &KernelSpec) -> Result<()> {
    if state.dims != seq.dims() || state.num_basis != kernel.num_basis() {
        return Err(HawkesError::InvalidParams(format!(
            "state is D={}, M={} but data is D={}, M={}",
            state.dims,
            state.num_basis,
            seq.dims(),
            kernel.num_basis()
        )));
    }
    Ok(())
}

/// Adam ascent on the ELBO, keeping moment estimates and the decayed
/// learning rate across EM rounds.
#[derive(Debug, Clone)]
pub struct EStepper {
    adam: Adam,
    lr: f64,
    decay: f64,
    samples: usize,
    params: Vec<f64>,
    grad: Vec<f64>,
}

impl EStepper {
    pub fn new(state: &VariationalState, cfg: &EmConfig) -> Self {
        let n = state.len();
        Self {
            adam: Adam::new(2 * n),
            lr: cfg.learning_rate,
            decay: cfg.lr_decay,
            samples: cfg.samples,
            params: vec![0.0; 2 * n],
            grad: vec![0.0; 2 * n],
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// One ascent step; returns the ELBO estimate at the pre-step state.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        state: &mut VariationalState,
        prior: &PriorSpec,
        hyper: &HyperParams,
        feats: Option<&ExcitationFeatures>,
        rng: &mut R,
    ) -> Result<f64> {
        let eps: Vec<Vec<f64>> = (0..self.samples).map(|_| state.draw_noise(rng)).collect();
        let obj = objective_impl(state, prior, hyper, feats, &eps)?;
        let n = state.len();
        self.params[..n].copy_from_slice(&state.gamma_mu);
        self.params[n..].copy_from_slice(&state.gamma_sigma);
        self.grad[..n].copy_from_slice(&obj.grad_mu);
        self.grad[n..].copy_from_slice(&obj.grad_sigma);
        self.adam.ascend(&mut self.params, &self.grad, self.lr);
        self.lr *= self.decay;
        state.gamma_mu.copy_from_slice(&self.params[..n]);
        state.gamma_sigma.copy_from_slice(&self.params[n..]);
        Ok(obj.value)
    }
}

/// `cfg.e_steps` ascent steps from a fresh optimizer state.
pub fn e_step<R: Rng + ?Sized>(
    state: &VariationalState,
    prior: &PriorSpec,
    hyper: &HyperParams,
    seq: &EventSequence,
    kernel: &KernelSpec,
    cfg: &EmConfig,
    rng: &mut R,
) -> Result<VariationalState> {
    check_shapes(state, seq, kernel)?;
    cfg.validate()?;
    let feats = ExcitationFeatures::new(seq, kernel);
    let mut next = state.clone();
    let mut stepper = EStepper::new(state, cfg);
    for _ in 0..cfg.e_steps {
        stepper.step(&mut next, prior, hyper, Some(&feats), rng)?;
    }
    Ok(next)
}

/// `alpha <- beta * alpha_old + (1 - beta) * closed_form(fresh samples)`.
pub fn m_step<R: Rng + ?Sized>(
    alpha_old: &HyperParams,
    state: &VariationalState,
    prior: &PriorSpec,
    cfg: &EmConfig,
    rng: &mut R,
) -> HyperParams {
    let samples: Vec<ModelParams> = (0..cfg.samples.max(1)).map(|_| state.reparam_sample(&state.draw_noise(rng))).collect();
    blend(alpha_old, &m_step_closed_form(prior, &samples), cfg.momentum)
}

/// Convex combination `beta * old + (1 - beta) * target`.
pub fn blend(old: &HyperParams, target: &HyperParams, beta: f64) -> HyperParams {
    let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| beta * x + (1.0 - beta) * y).collect();
    HyperParams { mu: mix(&old.mu, &target.mu), weights: mix(&old.weights, &target.weights) }
}

/// Output of [`fit_vi`].
#[derive(Debug, Clone)]
pub struct VariationalFit {
    pub state: VariationalState,
    pub hyper: HyperParams,
    pub prior: PriorSpec,
    pub config: EmConfig,
    /// Mean ELBO estimate over the E-step iterations of each round.
    pub elbo_trace: Vec<f64>,
    /// ELBO estimate of every E-step iteration.
    pub elbo_steps: Vec<f64>,
}

impl VariationalFit {
    pub fn posterior_mode(&self) -> ModelParams {
        self.state.posterior_mode()
    }

    pub fn posterior_std(&self) -> PosteriorStd {
        self.state.posterior_std()
    }
}

/// Runs `T_EM` rounds of (`T_E` E-step iterations, one M-step).
pub fn fit_vi(seq: &EventSequence, kernel: &KernelSpec, prior: &PriorSpec, cfg: &EmConfig) -> Result<VariationalFit> {
    if seq.is_empty() {
        return Err(HawkesError::InvalidSequence("cannot fit an empty sequence".into()));
    }
    kernel.validate()?;
    fit_vi_features(&ExcitationFeatures::new(seq, kernel), prior, cfg)
}

/// [`fit_vi`] with precomputed features.
pub fn fit_vi_features(feats: &ExcitationFeatures, prior: &PriorSpec, cfg: &EmConfig) -> Result<VariationalFit> {
    cfg.validate()?;
    let (d, nb) = (feats.dims(), feats.num_basis());
    let mut rng = rng_from_seed(cfg.seed);
    let mut state = VariationalState::init(d, nb, &cfg.init, &mut rng)?;
    let mut hyper = HyperParams::constant(prior, d, nb, cfg.init.alpha);
    hyper.validate()?;
    let mut stepper = EStepper::new(&state, cfg);
    let mut elbo_trace = Vec::with_capacity(cfg.em_rounds);
    let mut elbo_steps = Vec::with_capacity(cfg.em_rounds * cfg.e_steps);
    for _ in 0..cfg.em_rounds {
        let start = elbo_steps.len();
        for _ in 0..cfg.e_steps {
            elbo_steps.push(stepper.step(&mut state, prior, &hyper, Some(feats), &mut rng)?);
        }
        if cfg.e_steps > 0 {
            let round = &elbo_steps[start..];
            elbo_trace.push(round.iter().sum::<f64>() / round.len() as f64);
        }
        hyper = m_step(&hyper, &state, prior, cfg, &mut rng);
    }
    Ok(VariationalFit { state, hyper, prior: *prior, config: cfg.clone(), elbo_trace, elbo_steps })
}
