mod common;

use hawkes_vem::mle::{fit_mle, penalty_value, prox_group, MleOptions, PenaltySpec};
use hawkes_vem::simulate::{generate, rng_from_seed, simulate_params, StopRule, SyntheticConfig};
use hawkes_vem::{log_likelihood, KernelSpec, ModelParams};
use proptest::prelude::*;

#[test]
fn objective_trace_never_increases() {
    let cfg = SyntheticConfig::erdos_renyi(6, StopRule::Events(1500), 5);
    let (_, seq) = generate(&cfg).unwrap();
    for pen in ["none", "l1:c=5", "l2:c=5", "l1:c=2+gl:c=2"] {
        let pen: PenaltySpec = pen.parse().unwrap();
        let k = if matches!(pen, PenaltySpec::Composite(_)) { KernelSpec::gaussian_cutoff(3, 1.5).unwrap() } else { cfg.kernel.clone() };
        let report = fit_mle(&seq, &k, &pen, &MleOptions::default()).unwrap();
        assert!(report.objective_trace.windows(2).all(|w| w[1] <= w[0]), "{pen}");
        let final_obj = -log_likelihood(&report.params, &k, &seq).unwrap() + penalty_value(&pen, &report.params);
        assert!((final_obj - report.objective_trace.last().unwrap()).abs() < 1e-8 * final_obj.abs());
    }
}

#[test]
fn unpenalized_fit_recovers_parameters() {
    let truth = ModelParams::new(vec![0.5, 0.3], vec![0.4, 0.0, 0.3, 0.2], 1).unwrap();
    let k = KernelSpec::exponential(1.0).unwrap();
    let seq = simulate_params(&truth, &k, StopRule::Events(40_000), &mut rng_from_seed(3)).unwrap();
    let opts = MleOptions { max_iter: 20_000, ..MleOptions::default() };
    let fit = fit_mle(&seq, &k, &PenaltySpec::None, &opts).unwrap();
    for (a, b) in fit.params.mu.iter().zip(&truth.mu) {
        assert!((a - b).abs() < 0.08, "mu {a} vs {b}");
    }
    for (a, b) in fit.params.weights.iter().zip(&truth.weights) {
        assert!((a - b).abs() < 0.05, "w {a} vs {b}");
    }
    // the fit must beat the truth on its own objective
    assert!(log_likelihood(&fit.params, &k, &seq).unwrap() >= log_likelihood(&truth, &k, &seq).unwrap() - 1e-6);
}

#[test]
fn heavy_l1_zeroes_every_weight() {
    let cfg = SyntheticConfig::erdos_renyi(5, StopRule::Events(500), 8);
    let (_, seq) = generate(&cfg).unwrap();
    let fit = fit_mle(&seq, &cfg.kernel, &PenaltySpec::L1(1e6), &MleOptions::default()).unwrap();
    assert!(fit.params.weights.iter().all(|w| *w == 0.0));
    // mu then sits at the Poisson estimate N_i / T, up to the stopping tolerance
    for (i, c) in seq.counts().iter().enumerate() {
        let target = *c as f64 / seq.horizon();
        assert!((fit.params.mu[i] - target).abs() < 1e-2 * target, "{} vs {target}", fit.params.mu[i]);
    }
}

#[test]
fn penalty_strings_round_trip() {
    for s in ["none", "l1:c=10", "l2:c=0.5", "gl:c=3", "l1:c=5+gl:c=5"] {
        let p: PenaltySpec = s.parse().unwrap();
        assert_eq!(p.to_string().parse::<PenaltySpec>().unwrap(), p);
    }
    assert!("l1".parse::<PenaltySpec>().is_err());
    assert!("l1:c=-1".parse::<PenaltySpec>().is_err());
    assert!("lasso:c=1".parse::<PenaltySpec>().is_err());
}

proptest! {
    /// Group soft-thresholding equals the minimizer of
    /// `||x - v||^2 / 2 + t ||x||` written as radial shrinkage.
    #[test]
    fn group_prox_is_radial_shrinkage(v in prop::collection::vec(-3.0f64..3.0, 1..6), t in 0.0f64..4.0) {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut x = v.clone();
        prox_group(&mut x, t);
        let factor = if norm > t { 1.0 - t / norm } else { 0.0 };
        for (a, b) in x.iter().zip(&v) {
            prop_assert!((a - factor * b).abs() < 1e-12);
        }
    }
}
