//! Synthetic networks and exact event simulation by Ogata thinning.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::events::{Event, EventSequence};
use crate::kernel::KernelSpec;
use crate::model::{branching_matrix, spectral_radius, stationary_rates, ModelParams};

/// The generator used for every stochastic routine in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a path of task indices.
///
/// Rule: `s_0 = splitmix64(seed)`, `s_{k+1} = splitmix64(s_k ^ splitmix64(idx_k + 1))`.
pub fn child_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |s, &idx| splitmix64(s ^ splitmix64(idx.wrapping_add(1))))
}

/// When to stop a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Run until exactly this many events; the horizon is then the last
    /// event time plus one mean inter-event gap.
    Events(usize),
    /// Run over `[0, T)`.
    Horizon(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub dims: usize,
    /// Edge probability; `None` means `ln(D) / D`.
    pub edge_prob: Option<f64>,
    pub mu_range: (f64, f64),
    pub weight_range: (f64, f64),
    pub kernel: KernelSpec,
    pub stop: StopRule,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Erdos-Renyi setup with `mu ~ U[0, 0.02]`, `w ~ U[0.1, 0.2]`,
    /// exponential kernel with unit decay.
    pub fn erdos_renyi(dims: usize, stop: StopRule, seed: u64) -> Self {
        Self {
            dims,
            edge_prob: None,
            mu_range: (0.0, 0.02),
            weight_range: (0.1, 0.2),
            kernel: KernelSpec::Exponential { decay: 1.0 },
            stop,
            seed,
        }
    }

    pub fn edge_probability(&self) -> f64 {
        self.edge_prob.unwrap_or_else(|| default_edge_prob(self.dims))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HawkesError::InvalidConfig(m));
        if self.dims == 0 {
            return bad("dims must be positive".into());
        }
        let p = self.edge_probability();
        if !(p > 0.0 && p <= 1.0) {
            return bad(format!("edge probability must lie in (0, 1], got {p}"));
        }
        let (mlo, mhi) = self.mu_range;
        if !(mlo >= 0.0 && mhi > 0.0 && mlo <= mhi) {
            return bad(format!("mu range [{mlo}, {mhi}] must be nonnegative with a positive upper end"));
        }
        let (wlo, whi) = self.weight_range;
        if !(wlo > 0.0 && wlo <= whi) {
            return bad(format!("weight range [{wlo}, {whi}] must be positive"));
        }
        match self.stop {
            StopRule::Events(0) => return bad("target event count must be positive".into()),
            StopRule::Horizon(t) if !(t > 0.0 && t.is_finite()) => return bad(format!("horizon must be positive, got {t}")),
            _ => {}
        }
        self.kernel.validate()
    }
}

/// `ln(D) / D`, capped at 1.
pub fn default_edge_prob(dims: usize) -> f64 {
    if dims <= 1 {
        1.0
    } else {
        ((dims as f64).ln() / dims as f64).min(1.0)
    }
}

/// A sampled network and the parameters used to simulate from it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Row-major `D x D`; `adjacency[i * D + j]` is the edge `j -> i`.
    pub adjacency: Vec<bool>,
    pub params: ModelParams,
}

impl GroundTruth {
    pub fn dims(&self) -> usize {
        self.params.dims()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().filter(|a| **a).count()
    }

    /// `sum_m W*[i][j][m]`, row-major.
    pub fn edge_weights(&self) -> Vec<f64> {
        self.params.edge_weights()
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

/// Samples a directed Erdos-Renyi graph (self-loops included) and its
/// parameters. The number of bases follows `cfg.kernel`.
pub fn sample_graph<R: Rng + ?Sized>(cfg: &SyntheticConfig, rng: &mut R) -> Result<GroundTruth> {
    cfg.validate()?;
    let d = cfg.dims;
    let nb = cfg.kernel.num_basis();
    let p = cfg.edge_probability();
    let adjacency: Vec<bool> = (0..d * d).map(|_| rng.random::<f64>() < p).collect();
    let mut weights = vec![0.0; d * d * nb];
    for (k, edge) in adjacency.iter().enumerate() {
        if *edge {
            for w in &mut weights[k * nb..(k + 1) * nb] {
                *w = uniform(rng, cfg.weight_range.0, cfg.weight_range.1);
            }
        }
    }
    let mu = (0..d)
        .map(|_| loop {
            let m = uniform(rng, cfg.mu_range.0, cfg.mu_range.1);
            if m > 0.0 {
                break m;
            }
        })
        .collect();
    let params = ModelParams::new(mu, weights, nb)?;
    Ok(GroundTruth { adjacency, params })
}

/// Running state of the intensity during simulation.
trait IntensityState {
    /// Upper bound on `sum_i lambda_i(s)` for all `s >= t` until the next event.
    fn bound(&mut self, t: f64) -> f64;
    /// Fills `out` with `lambda_i(t)` and returns the total.
    fn intensities(&mut self, t: f64, out: &mut [f64]) -> f64;
    fn push(&mut self, t: f64, dim: usize);
}

struct ExpState<'a> {
    params: &'a ModelParams,
    decay: f64,
    acc: Vec<f64>,
    col_sums: Vec<f64>,
    last: f64,
}

impl<'a> ExpState<'a> {
    fn new(params: &'a ModelParams, decay: f64) -> Self {
        let d = params.dims();
        let col_sums = (0..d).map(|j| (0..d).map(|i| params.w(i, j, 0)).sum()).collect();
        Self { params, decay, acc: vec![0.0; d], col_sums, last: 0.0 }
    }

    fn advance(&mut self, t: f64) {
        if t > self.last {
            let f = (-self.decay * (t - self.last)).exp();
            for a in &mut self.acc {
                *a *= f;
            }
            self.last = t;
        }
    }
}

impl IntensityState for ExpState<'_> {
    fn bound(&mut self, t: f64) -> f64 {
        self.advance(t);
        self.params.mu.iter().sum::<f64>() + self.col_sums.iter().zip(&self.acc).map(|(c, a)| c * a).sum::<f64>()
    }

    fn intensities(&mut self, t: f64, out: &mut [f64]) -> f64 {
        self.advance(t);
        let d = self.params.dims();
        let mut total = 0.0;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.params.weights[i * d..(i + 1) * d];
            *o = self.params.mu[i] + row.iter().zip(&self.acc).map(|(w, a)| w * a).sum::<f64>();
            total += *o;
        }
        total
    }

    fn push(&mut self, t: f64, dim: usize) {
        self.advance(t);
        self.acc[dim] += self.decay;
    }
}

struct WindowState<'a> {
    params: &'a ModelParams,
    kernel: &'a KernelSpec,
    reach: f64,
    recent: std::collections::VecDeque<Event>,
    /// `col_sums[j * M + m] = sum_i W[i][j][m]`.
    col_sums: Vec<f64>,
}

impl<'a> WindowState<'a> {
    fn new(params: &'a ModelParams, kernel: &'a KernelSpec) -> Self {
        let d = params.dims();
        let nb = params.num_basis();
        let mut col_sums = vec![0.0; d * nb];
        for i in 0..d {
            for j in 0..d {
                for m in 0..nb {
                    col_sums[j * nb + m] += params.w(i, j, m);
                }
            }
        }
        let reach = kernel.support_end().unwrap_or(f64::INFINITY);
        Self { params, kernel, reach, recent: Default::default(), col_sums }
    }

    fn expire(&mut self, t: f64) {
        while let Some(front) = self.recent.front() {
            if t - front.time > self.reach {
                self.recent.pop_front();
            } else {
                break;
            }
        }
    }
}

impl IntensityState for WindowState<'_> {
    fn bound(&mut self, t: f64) -> f64 {
        self.expire(t);
        let nb = self.params.num_basis();
        let mut total: f64 = self.params.mu.iter().sum();
        for ev in &self.recent {
            for m in 0..nb {
                total += self.col_sums[ev.dim * nb + m] * self.kernel.sup_from(m, t - ev.time);
            }
        }
        total
    }

    fn intensities(&mut self, t: f64, out: &mut [f64]) -> f64 {
        self.expire(t);
        let nb = self.params.num_basis();
        out.copy_from_slice(&self.params.mu);
        for ev in &self.recent {
            for m in 0..nb {
                let k = self.kernel.eval(m, t - ev.time);
                if k != 0.0 {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += self.params.w(i, ev.dim, m) * k;
                    }
                }
            }
        }
        out.iter().sum()
    }

    fn push(&mut self, t: f64, dim: usize) {
        self.recent.push_back(Event::new(t, dim));
    }
}

/// Exact simulation by thinning. Deterministic given the RNG state.
pub fn simulate<R: Rng + ?Sized>(
    truth: &GroundTruth,
    kernel: &KernelSpec,
    stop: StopRule,
    rng: &mut R,
) -> Result<EventSequence> {
    simulate_params(&truth.params, kernel, stop, rng)
}

/// [`simulate`] from bare parameters.
pub fn simulate_params<R: Rng + ?Sized>(
    params: &ModelParams,
    kernel: &KernelSpec,
    stop: StopRule,
    rng: &mut R,
) -> Result<EventSequence> {
    params.validate()?;
    if kernel.num_basis() != params.num_basis() {
        return Err(HawkesError::InvalidParams("kernel and parameters disagree on M".into()));
    }
    let d = params.dims();
    let radius = spectral_radius(&branching_matrix(params, kernel), d);
    if radius >= 1.0 {
        log::warn!("simulating a process with branching spectral radius {radius:.3} >= 1");
    }
    let (max_events, horizon) = match stop {
        StopRule::Events(n) => {
            if n == 0 {
                return Err(HawkesError::InvalidConfig("target event count must be positive".into()));
            }
            (n, f64::INFINITY)
        }
        StopRule::Horizon(t) => {
            let base = params.mu.iter().sum::<f64>() * t;
            let expected = stationary_rates(params, kernel).map_or(base, |r| r.iter().sum::<f64>() * t);
            let cap = (100.0 * expected.max(1.0)).min(usize::MAX as f64 / 2.0) as usize;
            (cap, t)
        }
    };

    let mut state: Box<dyn IntensityState> = match kernel {
        KernelSpec::Exponential { decay } => Box::new(ExpState::new(params, *decay)),
        KernelSpec::GaussianBasis { .. } => Box::new(WindowState::new(params, kernel)),
    };
    let mut lambdas = vec![0.0; d];
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        let bound = state.bound(t);
        let wait: f64 = Exp1.sample(rng);
        t += wait / bound;
        if t >= horizon {
            break;
        }
        let total = state.intensities(t, &mut lambdas);
        let u: f64 = rng.random();
        if u * bound > total {
            continue;
        }
        let mut pick = rng.random::<f64>() * total;
        let mut dim = d - 1;
        for (i, l) in lambdas.iter().enumerate() {
            if pick < *l {
                dim = i;
                break;
            }
            pick -= l;
        }
        state.push(t, dim);
        events.push(Event::new(t, dim));
        if events.len() >= max_events {
            if matches!(stop, StopRule::Horizon(_)) {
                return Err(HawkesError::SimulationCapExceeded { cap: max_events });
            }
            break;
        }
    }
    let horizon = match stop {
        StopRule::Horizon(t) => t,
        StopRule::Events(n) => {
            let last = events.last().map_or(0.0, |e| e.time);
            last + last / n as f64
        }
    };
    EventSequence::new(events, horizon, d)
}

/// Samples a graph and simulates once, both from `cfg.seed`.
pub fn generate(cfg: &SyntheticConfig) -> Result<(GroundTruth, EventSequence)> {
    let truth = sample_graph(cfg, &mut rng_from_seed(child_seed(cfg.seed, &[0])))?;
    let seq = simulate(&truth, &cfg.kernel, cfg.stop, &mut rng_from_seed(child_seed(cfg.seed, &[0, 0])))?;
    Ok((truth, seq))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_when_p_is_one() {
        let mut cfg = SyntheticConfig::erdos_renyi(6, StopRule::Events(10), 1);
        cfg.edge_prob = Some(1.0);
        let truth = sample_graph(&cfg, &mut rng_from_seed(3)).unwrap();
        assert_eq!(truth.num_edges(), 36);
        for (k, w) in truth.edge_weights().iter().enumerate() {
            assert!(truth.adjacency[k]);
            assert!((0.1..=0.2).contains(w));
        }
    }

    #[test]
    fn weights_positive_iff_edge() {
        let cfg = SyntheticConfig::erdos_renyi(12, StopRule::Events(10), 7);
        let truth = sample_graph(&cfg, &mut rng_from_seed(9)).unwrap();
        for (a, w) in truth.adjacency.iter().zip(truth.edge_weights()) {
            assert_eq!(*a, w > 0.0);
        }
        assert!(truth.params.mu.iter().all(|m| *m > 0.0 && *m <= 0.02));
    }

    #[test]
    fn same_seed_same_sequence() {
        let cfg = SyntheticConfig::erdos_renyi(5, StopRule::Events(300), 11);
        let (t1, s1) = generate(&cfg).unwrap();
        let (t2, s2) = generate(&cfg).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 300);
        let last = s1.events().last().unwrap().time;
        assert!((s1.horizon() - last * (1.0 + 1.0 / 300.0)).abs() < 1e-12);
    }

    #[test]
    fn event_stop_prefix_property() {
        let cfg = SyntheticConfig::erdos_renyi(4, StopRule::Events(50), 5);
        let truth = sample_graph(&cfg, &mut rng_from_seed(1)).unwrap();
        let short = simulate(&truth, &cfg.kernel, StopRule::Events(50), &mut rng_from_seed(2)).unwrap();
        let long = simulate(&truth, &cfg.kernel, StopRule::Events(120), &mut rng_from_seed(2)).unwrap();
        assert_eq!(short.events(), &long.events()[..50]);
    }

    #[test]
    fn poisson_count() {
        let p = ModelParams::poisson(1, 1, 2.0).unwrap();
        let k = KernelSpec::exponential(1.0).unwrap();
        let s = simulate_params(&p, &k, StopRule::Horizon(1000.0), &mut rng_from_seed(42)).unwrap();
        let n = s.len() as f64;
        assert!((n - 2000.0).abs() < 3.0 * 2000f64.sqrt(), "count {n}");
    }

    #[test]
    fn supercritical_hits_cap() {
        let p = ModelParams::new(vec![1.0], vec![1.5], 1).unwrap();
        let k = KernelSpec::exponential(1.0).unwrap();
        let err = simulate_params(&p, &k, StopRule::Horizon(200.0), &mut rng_from_seed(1)).unwrap_err();
        assert!(matches!(err, HawkesError::SimulationCapExceeded { .. }));
    }

    #[test]
    fn child_seeds_differ() {
        let a = child_seed(1, &[0, 0]);
        let b = child_seed(1, &[0, 1]);
        let c = child_seed(1, &[1, 0]);
        let d = child_seed(2, &[0, 0]);
        assert!(a != b && a != c && b != c && a != d);
        assert_eq!(a, child_seed(1, &[0, 0]));
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = SyntheticConfig::erdos_renyi(5, StopRule::Events(10), 1);
        cfg.edge_prob = Some(0.0);
        assert!(cfg.validate().is_err());
        let mut cfg = SyntheticConfig::erdos_renyi(5, StopRule::Events(0), 1);
        assert!(cfg.validate().is_err());
        cfg.stop = StopRule::Events(1);
        cfg.weight_range = (0.0, 0.1);
        assert!(cfg.validate().is_err());
    }
}
