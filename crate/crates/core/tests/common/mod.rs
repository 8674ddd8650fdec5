//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's likelihood or kernel code.

#![allow(dead_code)]

use std::f64::consts::PI;

use hawkes_vem::{Event, EventSequence, KernelSpec, ModelParams};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Kernel formulas written out from their definitions. Gaussian bases are
/// cut at six scales when `truncate` is set.
pub fn kernel_value(kernel: &KernelSpec, m: usize, t: f64, truncate: bool) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    match kernel {
        KernelSpec::Exponential { decay } => decay * (-decay * t).exp(),
        KernelSpec::GaussianBasis { centers, scale } => {
            let z = (t - centers[m]) / scale;
            if truncate && z.abs() > 6.0 {
                0.0
            } else {
                (-0.5 * z * z).exp() / (2.0 * PI * scale * scale)
            }
        }
    }
}

/// `lambda_i(t)` by direct summation over every earlier event.
pub fn naive_intensity(p: &ModelParams, kernel: &KernelSpec, events: &[Event], i: usize, t: f64, truncate: bool) -> f64 {
    let d = p.dims();
    let nb = p.num_basis();
    let mut lam = p.mu[i];
    for ev in events.iter().take_while(|e| e.time < t) {
        for m in 0..nb {
            lam += p.weights[(i * d + ev.dim) * nb + m] * kernel_value(kernel, m, t - ev.time, truncate);
        }
    }
    lam
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integral of `sum_i lambda_i` over `[start, end)` by quadrature between
/// consecutive events, with the untruncated kernels. Breakpoints are added
/// at the Gaussian peaks so no piece hides a narrow bump.
pub fn quadrature_compensator(p: &ModelParams, kernel: &KernelSpec, seq: &EventSequence, start: f64, end: f64) -> f64 {
    let d = p.dims();
    let nb = p.num_basis();
    // column sums: total weight that an event of source j puts on basis m
    let mut col = vec![0.0; d * nb];
    for i in 0..d {
        for j in 0..d {
            for m in 0..nb {
                col[j * nb + m] += p.weights[(i * d + j) * nb + m];
            }
        }
    }
    let mu_total: f64 = p.mu.iter().sum();
    let events = seq.events();
    let total = |t: f64| {
        let mut v = mu_total;
        for ev in events.iter().take_while(|e| e.time < t) {
            for m in 0..nb {
                v += col[ev.dim * nb + m] * kernel_value(kernel, m, t - ev.time, false);
            }
        }
        v
    };
    let mut cuts: Vec<f64> = vec![start, end];
    for ev in events {
        cuts.push(ev.time);
        if let KernelSpec::GaussianBasis { centers, .. } = kernel {
            cuts.extend(centers.iter().map(|c| ev.time + c));
        }
    }
    cuts.retain(|t| *t >= start && *t <= end);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2).map(|w| adaptive_simpson(&total, w[0], w[1], 1e-13)).sum()
}

/// `sum_n log lambda(t_n) - int lambda` from the definitions: naive double
/// sum for the event term, quadrature for the compensator.
pub fn oracle_log_likelihood(p: &ModelParams, kernel: &KernelSpec, seq: &EventSequence) -> f64 {
    let events = seq.events();
    let point: f64 = events
        .iter()
        .map(|ev| naive_intensity(p, kernel, events, ev.dim, ev.time, true).ln())
        .sum();
    point - quadrature_compensator(p, kernel, seq, 0.0, seq.horizon())
}

/// A sorted random sequence with uniform times on `[0, horizon)`.
pub fn random_sequence<R: Rng>(rng: &mut R, dims: usize, n: usize, horizon: f64) -> EventSequence {
    let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * horizon).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let events = times.into_iter().map(|t| Event::new(t, rng.random_range(0..dims))).collect();
    EventSequence::new(events, horizon, dims).unwrap()
}

pub fn random_params<R: Rng>(rng: &mut R, dims: usize, nb: usize, w_max: f64) -> ModelParams {
    let mu = (0..dims).map(|_| 0.05 + rng.random::<f64>()).collect();
    let w = (0..dims * dims * nb).map(|_| rng.random::<f64>() * w_max).collect();
    ModelParams::new(mu, w, nb).unwrap()
}

pub fn random_kernel<R: Rng>(rng: &mut R) -> KernelSpec {
    if rng.random::<bool>() {
        KernelSpec::exponential(0.3 + 2.0 * rng.random::<f64>()).unwrap()
    } else {
        let m = rng.random_range(1..=3);
        KernelSpec::gaussian_cutoff(m, 0.5 + 3.0 * rng.random::<f64>()).unwrap()
    }
}

/// Central finite difference of `f` along coordinate `k`.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], k: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[k] += h;
    xm[k] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Relative error with an absolute floor for near-zero references.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(a.abs()).max(floor)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// One-sample Kolmogorov-Smirnov statistic against `Exp(1)`.
pub fn ks_exponential(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, x)| {
            let cdf = 1.0 - (-x).exp();
            (cdf - k as f64 / n).abs().max(((k + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max)
}

/// Per-dimension compensator increments between consecutive events of that
/// dimension, for the exponential kernel, by an independent O(N D^2) pass.
pub fn rescaled_gaps_exponential(p: &ModelParams, decay: f64, seq: &EventSequence) -> Vec<f64> {
    let d = p.dims();
    // excitation[i] = sum over past events of w[i][j] exp(-decay (t - t_k))
    let mut excitation = vec![0.0; d];
    let mut comp = vec![0.0; d];
    let mut last_comp = vec![None::<f64>; d];
    let mut gaps = Vec::new();
    let mut t_prev = 0.0;
    for ev in seq.events() {
        let dt = ev.time - t_prev;
        let decay_factor = (-decay * dt).exp();
        for i in 0..d {
            // int of mu + decay * x e^{-decay s} over the gap
            comp[i] += p.mu[i] * dt + excitation[i] * (1.0 - decay_factor);
            excitation[i] *= decay_factor;
        }
        if let Some(prev) = last_comp[ev.dim] {
            gaps.push(comp[ev.dim] - prev);
        }
        last_comp[ev.dim] = Some(comp[ev.dim]);
        for i in 0..d {
            excitation[i] += p.weights[i * d + ev.dim];
        }
        t_prev = ev.time;
    }
    gaps
}
