use hawkes_vem::metrics::{
    f1_score, f1_score_with, fpr_fnr, precision_at_k, precision_at_k_with, predictive_loglik, relative_error, EdgeEstimate,
    MetricOptions, MetricSpec,
};
use hawkes_vem::simulate::GroundTruth;
use hawkes_vem::{log_likelihood, window_log_likelihood, Event, EventSequence, KernelSpec, ModelParams};
use proptest::prelude::*;

fn truth(d: usize, adjacency: Vec<bool>) -> GroundTruth {
    let weights = adjacency.iter().map(|a| if *a { 0.15 } else { 0.0 }).collect();
    GroundTruth { adjacency, params: ModelParams::new(vec![0.01; d], weights, 1).unwrap() }
}

fn truth_strategy() -> impl Strategy<Value = (usize, Vec<bool>, Vec<f64>, Vec<f64>)> {
    (2usize..7).prop_flat_map(|d| {
        (
            Just(d),
            prop::collection::vec(any::<bool>(), d * d),
            prop::collection::vec(0.0f64..0.3, d * d),
            prop::collection::vec(0.001f64..0.2, d * d),
        )
    })
}

#[test]
fn hand_computed_f1_and_rates() {
    // edges at 0, 1, 2; estimate hits 0, 1 and adds 3
    let t = truth(2, vec![true, true, true, false]);
    let e = EdgeEstimate::new(2, vec![0.1, 0.2, 0.01, 0.3], None).unwrap();
    let f = f1_score(&e, &t, 0.04);
    assert!((f - 2.0 * 2.0 / (2.0 * 2.0 + 1.0 + 1.0)).abs() < 1e-15);
    let r = fpr_fnr(&e, &t, 0.04);
    assert_eq!(r.fpr, Some(1.0));
    assert!((r.fnr.unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let rel = relative_error(&e, &t).unwrap();
    // |w - w*| / w* on edges, w / min w* on the non-edge, averaged
    let expected = (0.05 / 0.15 + 0.05 / 0.15 + 0.14 / 0.15 + 0.3 / 0.15) / 4.0;
    assert!((rel - expected).abs() < 1e-12);
}

#[test]
fn self_loop_exclusion() {
    let t = truth(2, vec![true, false, false, false]);
    let e = EdgeEstimate::new(2, vec![0.0, 0.0, 0.5, 0.0], None).unwrap();
    assert_eq!(f1_score(&e, &t, 0.04), 0.0);
    // without the diagonal there are no true edges and one false positive
    let opts = MetricOptions { exclude_self_loops: true };
    assert_eq!(f1_score_with(&e, &t, 0.04, opts), 0.0);
    assert_eq!(precision_at_k_with(&e, &t, 2, opts), 0.0);
}

#[test]
fn variational_ranking_uses_uncertainty() {
    // large weights but the most uncertain entry is the non-edge
    let t = truth(2, vec![true, false, true, false]);
    let e = EdgeEstimate::new(2, vec![0.1, 0.5, 0.1, 0.0], Some(vec![0.01, 0.5, 0.02, 0.1])).unwrap();
    assert_eq!(precision_at_k(&e, &t, 2), 1.0);
    let point = EdgeEstimate::new(2, e.weights.clone(), None).unwrap();
    assert_eq!(precision_at_k(&point, &t, 1), 0.0);
}

#[test]
fn metric_selectors_round_trip() {
    let specs = MetricSpec::parse_list("f1:eta=0.04,prec@20,relerr,fprfnr:eta=0.1").unwrap();
    assert_eq!(specs.len(), 4);
    for s in &specs {
        assert_eq!(s.to_string().parse::<MetricSpec>().unwrap(), *s);
    }
    assert!("prec@0".parse::<MetricSpec>().is_err() || MetricSpec::parse_list("prec@0").is_err());
    assert!("f2".parse::<MetricSpec>().is_err());
}

#[test]
fn predictive_loglik_is_the_tail_window() {
    let p = ModelParams::new(vec![0.4, 0.2], vec![0.2, 0.1, 0.0, 0.3], 1).unwrap();
    let k = KernelSpec::exponential(1.5).unwrap();
    let all: Vec<Event> = [(0.5, 0), (1.0, 1), (2.2, 0), (3.1, 0), (4.0, 1), (5.5, 0), (6.1, 1)]
        .iter()
        .map(|&(t, d)| Event::new(t, d))
        .collect();
    let train = EventSequence::new(all[..4].to_vec(), 3.5, 2).unwrap();
    let test = EventSequence::new(all[4..].to_vec(), 7.0, 2).unwrap();
    let full = EventSequence::new(all, 7.0, 2).unwrap();
    let pred = predictive_loglik(&p, &k, &train, &test).unwrap();
    let tail = window_log_likelihood(&p, &k, &full, 3.5, 7.0).unwrap();
    let head = window_log_likelihood(&p, &k, &full, 0.0, 3.5).unwrap();
    assert!((pred * 3.0 - tail).abs() < 1e-14);
    assert!((head + tail - log_likelihood(&p, &k, &full).unwrap()).abs() < 1e-13);
    let empty = EventSequence::new(vec![], 8.0, 2).unwrap();
    assert!(predictive_loglik(&p, &k, &train, &empty).is_err());
}

proptest! {
    /// Scaling all weights and the threshold together leaves F1 unchanged,
    /// and scaling weights with stds keeps the variational ranking.
    #[test]
    fn metrics_are_scale_invariant((d, adj, w, s) in truth_strategy(), scale in 0.1f64..10.0, k in 1usize..10) {
        let t = truth(d, adj);
        let a = EdgeEstimate::new(d, w.clone(), Some(s.clone())).unwrap();
        let b = EdgeEstimate::new(d, w.iter().map(|x| x * scale).collect(), Some(s.iter().map(|x| x * scale).collect())).unwrap();
        let eta = 0.04;
        let f_a = f1_score(&a, &t, eta);
        let f_b = f1_score(&b, &t, eta * scale);
        // thresholds can land exactly on a scaled weight only with measure zero
        prop_assert!((f_a - f_b).abs() < 1e-12);
        let k = k.min(d * d);
        prop_assert_eq!(precision_at_k(&a, &t, k), precision_at_k(&b, &t, k));
    }

    #[test]
    fn precision_at_all_pairs_is_edge_density((d, adj, w, s) in truth_strategy()) {
        let t = truth(d, adj);
        let density = t.num_edges() as f64 / (d * d) as f64;
        let point = EdgeEstimate::new(d, w.clone(), None).unwrap();
        let var = EdgeEstimate::new(d, w, Some(s)).unwrap();
        prop_assert!((precision_at_k(&point, &t, d * d) - density).abs() < 1e-12);
        prop_assert!((precision_at_k(&var, &t, d * d) - density).abs() < 1e-12);
    }

    #[test]
    fn f1_bounds((d, adj, w, _s) in truth_strategy(), eta in 0.0f64..0.3) {
        let t = truth(d, adj);
        let e = EdgeEstimate::new(d, w, None).unwrap();
        let f = f1_score(&e, &t, eta);
        prop_assert!((0.0..=1.0).contains(&f));
        let perfect = EdgeEstimate::from_params(&t.params);
        if t.num_edges() > 0 {
            prop_assert_eq!(f1_score(&perfect, &t, 0.04), 1.0);
            prop_assert!(relative_error(&perfect, &t).unwrap() == 0.0);
        }
    }
}
