mod common;

use common::*;
use hawkes_vem::{intensity, log_likelihood, window_log_likelihood, Event, EventSequence, ExcitationFeatures, KernelSpec, ModelParams};
use proptest::prelude::*;

fn instance(seed: u64, max_d: usize, max_n: usize) -> (ModelParams, KernelSpec, EventSequence) {
    use rand::RngExt;
    let mut rng = rng(seed);
    let d = rng.random_range(1..=max_d);
    let n = rng.random_range(1..=max_n);
    let kernel = random_kernel(&mut rng);
    let seq = random_sequence(&mut rng, d, n, n as f64 / 2.0 + 1.0);
    let params = random_params(&mut rng, d, kernel.num_basis(), 0.4 / d as f64);
    (params, kernel, seq)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matches_naive_oracle(seed in 0u64..10_000) {
        let (p, k, s) = instance(seed, 4, 120);
        let fast = log_likelihood(&p, &k, &s).unwrap();
        let slow = oracle_log_likelihood(&p, &k, &s);
        prop_assert!(rel_err(fast, slow, 1e-300) < 1e-8, "fast {fast} oracle {slow}");
    }

    #[test]
    fn intensity_matches_direct_sum(seed in 0u64..10_000, u in 0.0f64..1.0) {
        let (p, k, s) = instance(seed, 4, 80);
        let t = u * s.horizon();
        for i in 0..p.dims() {
            let direct = naive_intensity(&p, &k, s.events(), i, t, true);
            let lib = intensity(&p, &k, &s, i, t);
            prop_assert!(rel_err(lib, direct, 1e-300) < 1e-12);
        }
    }

    /// Relabelling dimensions consistently in the data and the parameters
    /// leaves the likelihood unchanged.
    #[test]
    fn permutation_invariance(seed in 0u64..10_000, shift in 1usize..5) {
        let (p, k, s) = instance(seed, 5, 150);
        let d = p.dims();
        let nb = p.num_basis();
        let perm = |i: usize| (i + shift) % d;
        let events: Vec<Event> = s.events().iter().map(|e| Event::new(e.time, perm(e.dim))).collect();
        let s2 = EventSequence::new(events, s.horizon(), d).unwrap();
        let mut mu = vec![0.0; d];
        let mut w = vec![0.0; d * d * nb];
        for i in 0..d {
            mu[perm(i)] = p.mu[i];
            for j in 0..d {
                for m in 0..nb {
                    w[(perm(i) * d + perm(j)) * nb + m] = p.w(i, j, m);
                }
            }
        }
        let p2 = ModelParams::new(mu, w, nb).unwrap();
        let a = log_likelihood(&p, &k, &s).unwrap();
        let b = log_likelihood(&p2, &k, &s2).unwrap();
        prop_assert!(rel_err(a, b, 1.0) < 1e-12);
    }

    /// A dimension with no events, no incoming excitation and rate `c`
    /// contributes exactly `-c T`.
    #[test]
    fn silent_dimension_costs_rate_times_horizon(seed in 0u64..10_000, c in 0.01f64..3.0) {
        let (p, k, s) = instance(seed, 3, 100);
        let d = p.dims();
        let nb = p.num_basis();
        let mut mu = p.mu.clone();
        mu.push(c);
        let mut w = vec![0.0; (d + 1) * (d + 1) * nb];
        for i in 0..d {
            for j in 0..d {
                for m in 0..nb {
                    w[(i * (d + 1) + j) * nb + m] = p.w(i, j, m);
                }
            }
        }
        let p2 = ModelParams::new(mu, w, nb).unwrap();
        let s2 = EventSequence::new(s.events().to_vec(), s.horizon(), d + 1).unwrap();
        let base = log_likelihood(&p, &k, &s).unwrap();
        let extended = log_likelihood(&p2, &k, &s2).unwrap();
        prop_assert!((extended - (base - c * s.horizon())).abs() <= 1e-10 * base.abs().max(1.0));
    }

    #[test]
    fn compensator_matches_quadrature(seed in 0u64..10_000) {
        let (p, k, s) = instance(seed, 4, 100);
        let feats = ExcitationFeatures::new(&s, &k);
        let fast = feats.compensator(&p);
        let slow = quadrature_compensator(&p, &k, &s, 0.0, s.horizon());
        prop_assert!(rel_err(fast, slow, 1e-300) < 1e-9, "fast {fast} quadrature {slow}");
    }

    #[test]
    fn windows_are_additive(seed in 0u64..10_000, u in 0.05f64..0.95) {
        let (p, k, s) = instance(seed, 4, 150);
        let cut = u * s.horizon();
        let head = window_log_likelihood(&p, &k, &s, 0.0, cut).unwrap();
        let tail = window_log_likelihood(&p, &k, &s, cut, s.horizon()).unwrap();
        let whole = log_likelihood(&p, &k, &s).unwrap();
        prop_assert!(rel_err(head + tail, whole, 1.0) < 1e-12);
    }

    /// The window likelihood uses the excitation carried in from before the
    /// window start, which the compensator quadrature also sees.
    #[test]
    fn window_matches_oracle(seed in 0u64..10_000, u in 0.1f64..0.9) {
        let (p, k, s) = instance(seed, 3, 100);
        let start = u * s.horizon();
        let lib = window_log_likelihood(&p, &k, &s, start, s.horizon()).unwrap();
        let events = s.events();
        let point: f64 = events
            .iter()
            .filter(|e| e.time >= start)
            .map(|e| naive_intensity(&p, &k, events, e.dim, e.time, true).ln())
            .sum();
        let oracle = point - quadrature_compensator(&p, &k, &s, start, s.horizon());
        prop_assert!(rel_err(lib, oracle, 1e-300) < 1e-8);
    }
}

#[test]
fn poisson_closed_form() {
    let seq = EventSequence::new(vec![Event::new(0.5, 0), Event::new(1.5, 1), Event::new(2.0, 0)], 4.0, 2).unwrap();
    let p = ModelParams::new(vec![0.5, 2.0], vec![0.0; 4], 1).unwrap();
    let k = KernelSpec::exponential(1.0).unwrap();
    let expected = 2.0 * 0.5f64.ln() + 2.0f64.ln() - 4.0 * 2.5;
    assert!((log_likelihood(&p, &k, &seq).unwrap() - expected).abs() < 1e-14);
}

#[test]
fn single_excitation_by_hand() {
    // one event at t=1 in dim 0, exciting dim 0 with w=0.5 and decay 2
    let seq = EventSequence::new(vec![Event::new(1.0, 0), Event::new(2.0, 0)], 3.0, 1).unwrap();
    let p = ModelParams::new(vec![0.3], vec![0.5], 1).unwrap();
    let k = KernelSpec::exponential(2.0).unwrap();
    let lam2 = 0.3 + 0.5 * 2.0 * (-2.0f64).exp();
    let comp = 0.3 * 3.0 + 0.5 * (1.0 - (-4.0f64).exp()) + 0.5 * (1.0 - (-2.0f64).exp());
    let expected = 0.3f64.ln() + lam2.ln() - comp;
    assert!((log_likelihood(&p, &k, &seq).unwrap() - expected).abs() < 1e-14);
}
