//! Model parameters `(mu, W)` and quantities derived from them.

use nalgebra::{DMatrix, DVector};

use crate::error::{HawkesError, Result};
use crate::events::EventSequence;
use crate::kernel::KernelSpec;

/// Exogenous rates `mu` (length `D`) and excitation weights `W` (`D x D x M`).
///
/// `W[i][j][m]` is the effect of source `j` on target `i` through basis `m`,
/// stored row-major as `weights[(i * D + j) * M + m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: usize,
    num_basis: usize,
    pub mu: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ModelParams {
    pub fn new(mu: Vec<f64>, weights: Vec<f64>, num_basis: usize) -> Result<Self> {
        let dims = mu.len();
        if dims == 0 || num_basis == 0 {
            return Err(HawkesError::InvalidParams("need D >= 1 and M >= 1".into()));
        }
        if weights.len() != dims * dims * num_basis {
            return Err(HawkesError::InvalidParams(format!(
                "weights has {} entries, expected D*D*M = {}",
                weights.len(),
                dims * dims * num_basis
            )));
        }
        let p = Self { dims, num_basis, mu, weights };
        p.validate()?;
        Ok(p)
    }

    /// `mu` set to `base_rate` everywhere and `W = 0`.
    pub fn poisson(dims: usize, num_basis: usize, base_rate: f64) -> Result<Self> {
        Self::new(vec![base_rate; dims], vec![0.0; dims * dims * num_basis], num_basis)
    }

    /// Builds parameters without checking signs; shapes are still asserted.
    /// Used by estimators whose iterates are positive by construction.
    pub(crate) fn from_parts_unchecked(mu: Vec<f64>, weights: Vec<f64>, num_basis: usize) -> Self {
        let dims = mu.len();
        assert_eq!(weights.len(), dims * dims * num_basis);
        Self { dims, num_basis, mu, weights }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.mu.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(HawkesError::InvalidParams(format!("mu[{i}] = {} must be positive", self.mu[i])));
        }
        if let Some(k) = self.weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(HawkesError::InvalidParams(format!("weight #{k} = {} must be nonnegative", self.weights[k])));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    #[inline]
    pub fn index(&self, target: usize, source: usize, basis: usize) -> usize {
        (target * self.dims + source) * self.num_basis + basis
    }

    #[inline]
    pub fn w(&self, target: usize, source: usize, basis: usize) -> f64 {
        self.weights[self.index(target, source, basis)]
    }

    pub fn set_w(&mut self, target: usize, source: usize, basis: usize, value: f64) {
        let k = self.index(target, source, basis);
        self.weights[k] = value;
    }

    /// Basis weights of edge `source -> target`.
    pub fn edge(&self, target: usize, source: usize) -> &[f64] {
        let k = self.index(target, source, 0);
        &self.weights[k..k + self.num_basis]
    }

    /// `D x D` row-major matrix of `sum_m W[i][j][m]`.
    pub fn edge_weights(&self) -> Vec<f64> {
        self.weights.chunks(self.num_basis).map(|c| c.iter().sum()).collect()
    }

    /// Total parameter count `D + D^2 M`.
    pub fn len(&self) -> usize {
        self.dims + self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flattened `[mu, W]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.mu);
        v.extend_from_slice(&self.weights);
        v
    }

    pub fn check_compatible(&self, kernel: &KernelSpec, seq: &EventSequence) -> Result<()> {
        if kernel.num_basis() != self.num_basis {
            return Err(HawkesError::InvalidParams(format!(
                "model has M={} bases but kernel has {}",
                self.num_basis,
                kernel.num_basis()
            )));
        }
        if seq.dims() != self.dims {
            return Err(HawkesError::InvalidParams(format!(
                "model has D={} but sequence has D={}",
                self.dims,
                seq.dims()
            )));
        }
        Ok(())
    }
}

/// `lambda_i(t)` given the events of `seq` strictly before `t`.
pub fn intensity(params: &ModelParams, kernel: &KernelSpec, seq: &EventSequence, target: usize, t: f64) -> f64 {
    let mut lambda = params.mu[target];
    for ev in seq.history_before(t) {
        let lag = t - ev.time;
        for (m, w) in params.edge(target, ev.dim).iter().enumerate() {
            if *w != 0.0 {
                lambda += w * kernel.eval(m, lag);
            }
        }
    }
    lambda
}

/// Branching matrix `G[i][j] = sum_m W[i][j][m] * int_0^inf kappa_m`, row-major.
pub fn branching_matrix(params: &ModelParams, kernel: &KernelSpec) -> Vec<f64> {
    let masses: Vec<f64> = (0..params.num_basis()).map(|m| kernel.mass(m)).collect();
    params
        .weights
        .chunks(params.num_basis())
        .map(|edge| edge.iter().zip(&masses).map(|(w, a)| w * a).sum())
        .collect()
}

/// Spectral radius of a nonnegative square matrix by power iteration.
///
/// Iterates on `G + I`, whose dominant eigenvalue is `rho(G) + 1` for
/// nonnegative `G`; the shift avoids oscillation on periodic matrices.
pub fn spectral_radius(matrix: &[f64], dims: usize) -> f64 {
    assert_eq!(matrix.len(), dims * dims);
    if matrix.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    let mut v = vec![1.0 / dims as f64; dims];
    let mut next = vec![0.0; dims];
    let mut estimate = 0.0;
    for _ in 0..100_000 {
        for i in 0..dims {
            let row = &matrix[i * dims..(i + 1) * dims];
            next[i] = v[i] + row.iter().zip(&v).map(|(g, x)| g * x).sum::<f64>();
        }
        let norm: f64 = next.iter().sum();
        let ratio = norm / v.iter().sum::<f64>();
        for (x, y) in v.iter_mut().zip(&next) {
            *x = y / norm;
        }
        if (ratio - estimate).abs() <= 1e-13 * ratio {
            estimate = ratio;
            break;
        }
        estimate = ratio;
    }
    (estimate - 1.0).max(0.0)
}

/// Stationary per-dimension rates `(I - G)^-1 mu`, or `None` when the
/// process is not subcritical.
pub fn stationary_rates(params: &ModelParams, kernel: &KernelSpec) -> Option<Vec<f64>> {
    let d = params.dims();
    let g = branching_matrix(params, kernel);
    if spectral_radius(&g, d) >= 1.0 {
        return None;
    }
    let a = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.0 } - g[i * d + j]);
    let mu = DVector::from_column_slice(&params.mu);
    a.lu().solve(&mu).map(|x| x.iter().copied().collect())
}

/// Asymptotic covariance of `N(T)/sqrt(T)` for a stationary process:
/// `(I - G)^-1 diag(Lambda) (I - G)^-T` with `Lambda` the stationary rates.
pub fn stationary_count_covariance(params: &ModelParams, kernel: &KernelSpec) -> Option<Vec<f64>> {
    let d = params.dims();
    let rates = stationary_rates(params, kernel)?;
    let g = branching_matrix(params, kernel);
    let a = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.0 } - g[i * d + j]);
    let inv = a.try_inverse()?;
    let cov = &inv * DMatrix::from_diagonal(&DVector::from_vec(rates)) * inv.transpose();
    Some((0..d * d).map(|k| cov[(k / d, k % d)]).collect())
}
