use std::fs;

use hawkes_vem::harness::{
    emit_plot_data, metric_names, run_sweep, split_train_test, write_results, EstimatorKind, ExperimentConfig, SweepAxis,
};
use hawkes_vem::io::{load_events, load_model, write_events, write_json, ModelFile};
use hawkes_vem::simulate::{generate, StopRule, SyntheticConfig};
use hawkes_vem::{Event, EventSequence, KernelSpec};
use proptest::prelude::*;

const SMALL: &str = r#"
seed = 9
threads = 1
split_fraction = 0.7
metrics = ["f1:eta=0.04", "prec@5", "relerr", "fprfnr:eta=0.04"]

[data]
source = "synthetic"
dims = 4

[sweep]
axis = "n_events"
values = [150, 300]

[replications]
graphs = 2
sims = 1

[[estimators]]
kind = "mle-adm4-like"

[[estimators]]
kind = "vi-exp"
em = { em_rounds = 3, e_steps = 20 }
"#;

#[test]
fn config_parses_with_defaults() {
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    assert_eq!(cfg.sweep.axis, SweepAxis::NEvents);
    assert_eq!(cfg.estimators[1].kind, EstimatorKind::ViExp);
    assert_eq!(cfg.estimators[1].em.em_rounds, 3);
    assert_eq!(cfg.estimators[1].em.samples, 1);
    let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(again, cfg);
    assert!(ExperimentConfig::from_toml_str(&SMALL.replace("graphs = 2", "graphs = 2\nbogus = 1")).is_err());
    assert!(ExperimentConfig::from_toml_str(&SMALL.replace("0.7", "1.5")).is_err());
}

#[test]
fn sweep_emits_one_row_per_metric_and_is_reproducible() {
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    let rows = run_sweep(&cfg).unwrap();
    let names = metric_names(&cfg).unwrap();
    // f1, prec@5, relerr, fpr, fnr, pred_ll; 2 sizes x 2 graphs x 1 sim
    assert_eq!(names.len(), 6);
    assert_eq!(rows.len(), 2 * 2 * cfg.estimators.len() * names.len());
    assert!(rows.iter().all(|r| r.status == "ok"), "{:?}", rows.iter().find(|r| r.status != "ok"));

    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_results(&a, &rows).unwrap();
    write_results(&b, &run_sweep(&cfg).unwrap()).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let plots = emit_plot_data(&rows, dir.path()).unwrap();
    assert_eq!(plots.len(), names.len());
    let f1 = fs::read_to_string(dir.path().join("plot_f1_eta_0.04.csv")).unwrap();
    // header plus one line per (sweep value, estimator)
    assert_eq!(f1.lines().count(), 1 + 2 * 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    let one = run_sweep(&cfg).unwrap();
    let two = run_sweep(&ExperimentConfig { threads: Some(3), ..cfg }).unwrap();
    let strip = |rows: Vec<hawkes_vem::harness::ResultRow>| rows.into_iter().map(|r| (r.metric, r.estimator, r.graph, r.value.to_bits())).collect::<Vec<_>>();
    assert_eq!(strip(one), strip(two));
}

#[test]
fn failed_fits_become_nan_rows() {
    let cfg = ExperimentConfig::from_toml_str(&SMALL.replace("values = [150, 300]", "values = [2]")).unwrap();
    let rows = run_sweep(&cfg).unwrap();
    // 70% of two events leaves nothing to test on, so every task fails but
    // still reports its full set of metric rows
    assert_eq!(rows.len(), 2 * cfg.estimators.len() * metric_names(&cfg).unwrap().len());
    assert!(rows.iter().all(|r| r.value.is_nan() && r.status.starts_with("error")));
}

#[test]
fn events_and_models_round_trip_on_disk() {
    let cfg = SyntheticConfig::erdos_renyi(3, StopRule::Events(200), 1);
    let (truth, seq) = generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.csv");
    write_events(&path, &seq).unwrap();
    assert_eq!(load_events(&path).unwrap(), seq);

    let model_path = dir.path().join("model.json");
    let k = KernelSpec::gaussian_cutoff(2, 1.0).unwrap();
    let params = hawkes_vem::ModelParams::new(truth.params.mu.clone(), truth.params.weights.iter().flat_map(|w| [*w, 0.5 * w]).collect(), 2).unwrap();
    write_json(&model_path, &ModelFile::new(&k, &params)).unwrap();
    let loaded = load_model(&model_path).unwrap();
    assert_eq!(loaded.params, params);
    assert_eq!(loaded.kernel, k);
    assert!(loaded.posterior.is_none());
}

#[test]
fn csv_without_sidecar_infers_dims_and_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    fs::write(&path, "time,dim\n1.0,0\n2.0,2\n4.0,1\n").unwrap();
    let seq = load_events(&path).unwrap();
    assert_eq!(seq.dims(), 3);
    // last event plus the mean gap between the first and last events
    assert!((seq.horizon() - 5.5).abs() < 1e-12);
    fs::write(&path, "time,dim\n2.0,0\n1.0,1\n").unwrap();
    assert!(load_events(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn split_partitions_the_sequence(n in 2usize..200, f in 0.05f64..0.95) {
        let events: Vec<Event> = (0..n).map(|k| Event::new(k as f64 + 0.5, k % 3)).collect();
        let seq = EventSequence::new(events, n as f64 + 1.0, 3).unwrap();
        match split_train_test(&seq, f) {
            Ok((train, test)) => {
                prop_assert_eq!(train.len() + test.len(), n);
                prop_assert_eq!(train.len(), ((f * n as f64) - 1e-9).ceil() as usize);
                prop_assert!(train.events().last().unwrap().time < train.horizon());
                prop_assert!(test.events()[0].time >= train.horizon());
                prop_assert_eq!(test.horizon(), seq.horizon());
            }
            Err(_) => {
                let k = ((f * n as f64) - 1e-9).ceil() as usize;
                prop_assert!(k == 0 || k >= n);
            }
        }
    }
}
