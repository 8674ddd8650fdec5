//! Exact log-likelihood and its gradient.
//!
//! The intensity is linear in `(mu, W)`:
//! `lambda_i(t_n) = mu_i + sum_{j,m} W[i][j][m] * F_n[j][m]` with
//! `F_n[j][m] = sum_{t_k < t_n, i_k = j} kappa_m(t_n - t_k)`, and the
//! compensator is `T * sum_i mu_i + sum_{i,j,m} W[i][j][m] * C[j][m]` with
//! `C[j][m] = sum_{k: i_k = j} int_0^{T - t_k} kappa_m`. Both `F` and `C`
//! depend only on the data and the kernel, so [`ExcitationFeatures`]
//! computes them once and every subsequent evaluation is a sparse pass over
//! the events. For the exponential kernel `F` is built with the usual
//! decaying-accumulator recursion in `O(N D)`.

use crate::error::{HawkesError, Result};
use crate::events::EventSequence;
use crate::kernel::KernelSpec;
use crate::model::ModelParams;

/// Data-dependent sufficient statistics of the likelihood over a window
/// `[start, end)`, conditioned on the full history before `start`.
#[derive(Debug, Clone)]
pub struct ExcitationFeatures {
    dims: usize,
    num_basis: usize,
    window: f64,
    targets: Vec<usize>,
    /// CSR layout: features of event `n` live in `row_ptr[n]..row_ptr[n+1]`.
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    /// `C[j * M + m]`.
    compensator: Vec<f64>,
}

impl ExcitationFeatures {
    /// Features for the whole observation window `[0, T)`.
    pub fn new(seq: &EventSequence, kernel: &KernelSpec) -> Self {
        Self::for_window(seq, kernel, 0.0, seq.horizon())
    }

    /// Features for events in `[start, end)`; events before `start` only
    /// contribute history.
    pub fn for_window(seq: &EventSequence, kernel: &KernelSpec, start: f64, end: f64) -> Self {
        assert!(start <= end, "window start {start} after end {end}");
        let dims = seq.dims();
        let nb = kernel.num_basis();
        let events: Vec<_> = seq.events().iter().copied().take_while(|e| e.time < end).collect();

        let mut compensator = vec![0.0; dims * nb];
        for ev in &events {
            let lo = (start - ev.time).max(0.0);
            let hi = end - ev.time;
            for m in 0..nb {
                compensator[ev.dim * nb + m] += kernel.integral(m, lo, hi);
            }
        }

        let mut targets = Vec::new();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        match kernel {
            KernelSpec::Exponential { decay } => {
                let mut acc = vec![0.0; dims];
                let mut seen = vec![false; dims];
                let mut last = 0.0;
                for ev in &events {
                    let factor = (-decay * (ev.time - last)).exp();
                    for a in acc.iter_mut() {
                        *a *= factor;
                    }
                    last = ev.time;
                    if ev.time >= start {
                        targets.push(ev.dim);
                        for j in 0..dims {
                            if seen[j] {
                                cols.push(j as u32);
                                vals.push(acc[j]);
                            }
                        }
                        row_ptr.push(cols.len());
                    }
                    acc[ev.dim] += decay;
                    seen[ev.dim] = true;
                }
            }
            KernelSpec::GaussianBasis { .. } => {
                let reach = kernel.support_end().unwrap_or(f64::INFINITY);
                let mut row = vec![0.0; dims * nb];
                let mut touched: Vec<usize> = Vec::new();
                for (n, ev) in events.iter().enumerate() {
                    if ev.time < start {
                        continue;
                    }
                    targets.push(ev.dim);
                    for past in events[..n].iter().rev() {
                        let lag = ev.time - past.time;
                        if lag > reach {
                            break;
                        }
                        for m in 0..nb {
                            let v = kernel.eval(m, lag);
                            if v != 0.0 {
                                let c = past.dim * nb + m;
                                if row[c] == 0.0 {
                                    touched.push(c);
                                }
                                row[c] += v;
                            }
                        }
                    }
                    touched.sort_unstable();
                    for &c in &touched {
                        cols.push(c as u32);
                        vals.push(row[c]);
                        row[c] = 0.0;
                    }
                    touched.clear();
                    row_ptr.push(cols.len());
                }
            }
        }

        Self { dims, num_basis: nb, window: end - start, targets, row_ptr, cols, vals, compensator }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    /// Events inside the window.
    pub fn num_events(&self) -> usize {
        self.targets.len()
    }

    /// Length of the window.
    pub fn window(&self) -> f64 {
        self.window
    }

    /// Stored nonzero feature entries.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Per-source compensator integrals `C[j][m]`, flattened.
    pub fn compensator_integrals(&self) -> &[f64] {
        &self.compensator
    }

    fn check_shapes(&self, mu: &[f64], weights: &[f64]) {
        assert_eq!(mu.len(), self.dims, "mu has wrong length");
        assert_eq!(weights.len(), self.dims * self.dims * self.num_basis, "weights have wrong length");
    }

    #[inline]
    fn intensity_at(&self, n: usize, mu: &[f64], weights: &[f64]) -> Result<f64> {
        let target = self.targets[n];
        let row = &weights[target * self.dims * self.num_basis..(target + 1) * self.dims * self.num_basis];
        let (lo, hi) = (self.row_ptr[n], self.row_ptr[n + 1]);
        let mut lambda = mu[target];
        for (c, v) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
            lambda += row[*c as usize] * v;
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(HawkesError::NonFiniteLikelihood { index: n, dim: target, value: lambda });
        }
        Ok(lambda)
    }

    fn compensator_value(&self, mu: &[f64], weights: &[f64]) -> f64 {
        let dm = self.dims * self.num_basis;
        let mut total = self.window * mu.iter().sum::<f64>();
        for row in weights.chunks(dm) {
            total += row.iter().zip(&self.compensator).map(|(w, c)| w * c).sum::<f64>();
        }
        total
    }

    /// Log-likelihood at raw parameter slices (`mu` length `D`, `weights`
    /// length `D^2 M`).
    pub fn log_likelihood(&self, mu: &[f64], weights: &[f64]) -> Result<f64> {
        self.check_shapes(mu, weights);
        let mut sum_log = 0.0;
        for n in 0..self.targets.len() {
            sum_log += self.intensity_at(n, mu, weights)?.ln();
        }
        Ok(sum_log - self.compensator_value(mu, weights))
    }

    /// Log-likelihood and its gradient. Gradients are written (not added)
    /// into `grad_mu` and `grad_w`.
    pub fn log_likelihood_grad(&self, mu: &[f64], weights: &[f64], grad_mu: &mut [f64], grad_w: &mut [f64]) -> Result<f64> {
        self.check_shapes(mu, weights);
        let dm = self.dims * self.num_basis;
        for g in grad_mu.iter_mut() {
            *g = -self.window;
        }
        for row in grad_w.chunks_mut(dm) {
            for (g, c) in row.iter_mut().zip(&self.compensator) {
                *g = -c;
            }
        }
        let mut sum_log = 0.0;
        for n in 0..self.targets.len() {
            let lambda = self.intensity_at(n, mu, weights)?;
            sum_log += lambda.ln();
            let inv = 1.0 / lambda;
            let target = self.targets[n];
            grad_mu[target] += inv;
            let grow = &mut grad_w[target * dm..(target + 1) * dm];
            let (lo, hi) = (self.row_ptr[n], self.row_ptr[n + 1]);
            for (c, v) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
                grow[*c as usize] += v * inv;
            }
        }
        Ok(sum_log - self.compensator_value(mu, weights))
    }

    /// Compensator `sum_i int lambda_i` over the window.
    pub fn compensator(&self, params: &ModelParams) -> f64 {
        self.check_shapes(&params.mu, &params.weights);
        self.compensator_value(&params.mu, &params.weights)
    }
}

/// Gradient of the log-likelihood with respect to `mu` and `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodGrad {
    pub value: f64,
    pub mu: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `sum_n log lambda_{i_n}(t_n) - sum_i int_0^T lambda_i(t) dt`.
pub fn log_likelihood(params: &ModelParams, kernel: &KernelSpec, seq: &EventSequence) -> Result<f64> {
    params.check_compatible(kernel, seq)?;
    ExcitationFeatures::new(seq, kernel).log_likelihood(&params.mu, &params.weights)
}

/// Log-likelihood restricted to the window `[start, end)`, with the
/// intensity conditioned on every event before `start`.
pub fn window_log_likelihood(
    params: &ModelParams,
    kernel: &KernelSpec,
    seq: &EventSequence,
    start: f64,
    end: f64,
) -> Result<f64> {
    params.check_compatible(kernel, seq)?;
    ExcitationFeatures::for_window(seq, kernel, start, end).log_likelihood(&params.mu, &params.weights)
}

pub fn log_likelihood_grad(params: &ModelParams, kernel: &KernelSpec, seq: &EventSequence) -> Result<LikelihoodGrad> {
    params.check_compatible(kernel, seq)?;
    let feats = ExcitationFeatures::new(seq, kernel);
    let mut mu = vec![0.0; params.dims()];
    let mut weights = vec![0.0; params.weights.len()];
    let value = feats.log_likelihood_grad(&params.mu, &params.weights, &mut mu, &mut weights)?;
    Ok(LikelihoodGrad { value, mu, weights })
}
