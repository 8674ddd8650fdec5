use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use hawkes_vem::harness::{self, emit_plot_data, write_results, write_timings, ExperimentConfig};
use hawkes_vem::io::{
    load_events, load_model, load_truth, write_events, write_json, write_trace, ModelFile, PosteriorFile, TruthFile,
    FORMAT_VERSION,
};
use hawkes_vem::metrics::{predictive_loglik, EdgeEstimate, MetricOptions, MetricSpec};
use hawkes_vem::mle::{fit_mle, MleOptions, PenaltySpec};
use hawkes_vem::simulate::{child_seed, rng_from_seed, simulate, StopRule, SyntheticConfig};
use hawkes_vem::vi::{fit_vi, EmConfig, PriorSpec};
use hawkes_vem::{HawkesError, KernelSpec, Result};

#[derive(Parser)]
#[command(name = "hawkes-vem", version, about = "Simulate multivariate Hawkes processes and learn their excitation network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an Erdos-Renyi network and simulate events from it.
    Simulate(SimulateArgs),
    /// Fit a penalized maximum-likelihood model.
    FitMle(FitMleArgs),
    /// Fit the variational posterior and prior scales by variational EM.
    FitVi(FitViArgs),
    /// Score a fitted model against a ground truth.
    Evaluate(EvaluateArgs),
    /// Held-out log-likelihood per test event.
    Predict(PredictArgs),
    /// Split an event file into train and test parts.
    Split(SplitArgs),
    /// Run a configured experiment sweep.
    Sweep(SweepArgs),
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    dims: usize,
    /// Edge probability; defaults to ln(D)/D.
    #[arg(long)]
    edge_prob: Option<f64>,
    /// Kernel, `exp:zeta=1` or `sg:M=10,Tc=5`.
    #[arg(long, default_value = "exp:zeta=1")]
    kernel: KernelSpec,
    /// Stop after this many events.
    #[arg(long, conflicts_with = "horizon")]
    n_events: Option<usize>,
    /// Simulate over [0, T) instead.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value = "0,0.02", value_parser = parse_range)]
    mu_range: (f64, f64),
    #[arg(long, default_value = "0.1,0.2", value_parser = parse_range)]
    weight_range: (f64, f64),
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct FitMleArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long, default_value = "exp:zeta=1")]
    kernel: KernelSpec,
    /// `none`, `l1:c=0.1`, `l2:c=0.05`, `gl:c=0.1`, or a `+`-joined mix.
    #[arg(long, default_value = "l1:c=10")]
    penalty: PenaltySpec,
    #[arg(long, default_value_t = 0.02)]
    lr: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    #[arg(long)]
    out: PathBuf,
    /// CSV of the objective after every accepted iterate.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct FitViArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long, default_value = "exp:zeta=1")]
    kernel: KernelSpec,
    /// `w=laplace|gaussian|group|column,mu=gaussian`.
    #[arg(long, default_value = "w=laplace,mu=gaussian")]
    prior: PriorSpec,
    /// Monte-Carlo samples per step.
    #[arg(long = "L", default_value_t = 1)]
    samples: usize,
    /// Momentum of the prior-scale update.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Learning rate.
    #[arg(long, default_value_t = 0.02)]
    eta: f64,
    /// E-step iterations per round.
    #[arg(long, default_value_t = 100)]
    te: usize,
    /// EM rounds.
    #[arg(long, default_value_t = 100)]
    tem: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model or posterior JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "f1:eta=0.04,prec@20,relerr,fprfnr:eta=0.04")]
    metrics: String,
    /// Leave self-pairs out of every metric.
    #[arg(long)]
    exclude_self_loops: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    fraction: f64,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML experiment description.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    graphs: Option<usize>,
    #[arg(long)]
    sims: Option<usize>,
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let stop = match (a.n_events, a.horizon) {
        (Some(n), _) => StopRule::Events(n),
        (None, Some(t)) => StopRule::Horizon(t),
        (None, None) => return Err(HawkesError::InvalidConfig("pass --n-events or --horizon".into())),
    };
    let cfg = SyntheticConfig {
        dims: a.dims,
        edge_prob: a.edge_prob,
        mu_range: a.mu_range,
        weight_range: a.weight_range,
        kernel: a.kernel.clone(),
        stop,
        seed: a.seed,
    };
    cfg.validate()?;
    let truth = harness::stable_graph(&cfg, child_seed(a.seed, &[0]))?;
    let seq = simulate(&truth, &cfg.kernel, stop, &mut rng_from_seed(child_seed(a.seed, &[1])))?;
    write_events(&a.out, &seq)?;
    if let Some(path) = &a.truth {
        write_json(path, &TruthFile::new(&a.kernel, &truth))?;
    }
    println!("{} events over [0, {}) with {} edges", seq.len(), seq.horizon(), truth.num_edges());
    Ok(())
}

fn run_fit_mle(a: FitMleArgs) -> Result<()> {
    let seq = load_events(&a.events)?;
    let opts = MleOptions { learning_rate: a.lr, max_iter: a.max_iter, ..Default::default() };
    let report = fit_mle(&seq, &a.kernel, &a.penalty, &opts)?;
    let mut file = ModelFile::new(&a.kernel, &report.params);
    file.estimator = Some(format!("mle {}", a.penalty));
    write_json(&a.out, &file)?;
    if let Some(path) = &a.trace {
        write_trace(path, &report.objective_trace)?;
    }
    println!(
        "{} iterations, objective {:.6}{}",
        report.iterations,
        report.objective_trace.last().copied().unwrap_or(f64::NAN),
        if report.converged { "" } else { " (not converged)" }
    );
    Ok(())
}

fn run_fit_vi(a: FitViArgs) -> Result<()> {
    let seq = load_events(&a.events)?;
    let cfg = EmConfig {
        samples: a.samples,
        momentum: a.beta,
        learning_rate: a.eta,
        e_steps: a.te,
        em_rounds: a.tem,
        seed: a.seed,
        ..Default::default()
    };
    let fit = fit_vi(&seq, &a.kernel, &a.prior, &cfg)?;
    write_json(&a.out, &PosteriorFile::new(&a.kernel, &fit))?;
    println!("final ELBO estimate {:.6}", fit.elbo_trace.last().copied().unwrap_or(f64::NAN));
    Ok(())
}

fn run_evaluate(a: EvaluateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (_, truth) = load_truth(&a.truth)?;
    if truth.dims() != model.params.dims() {
        return Err(HawkesError::InvalidParams("model and truth have different D".into()));
    }
    let est = match &model.posterior {
        Some(state) => EdgeEstimate::from_posterior(state),
        None => EdgeEstimate::from_params(&model.params),
    };
    let specs = MetricSpec::parse_list(&a.metrics).map_err(HawkesError::InvalidConfig)?;
    let opts = MetricOptions { exclude_self_loops: a.exclude_self_loops };
    let mut out = serde_json::Map::new();
    out.insert("version".into(), json!(FORMAT_VERSION));
    for spec in specs {
        for (name, value) in spec.evaluate(&est, &truth, opts)? {
            println!("{name}\t{value}");
            out.insert(name, if value.is_finite() { json!(value) } else { serde_json::Value::Null });
        }
    }
    if let Some(path) = &a.out {
        write_json(path, &out)?;
    }
    Ok(())
}

fn run_predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let train = load_events(&a.train)?;
    let test = load_events(&a.test)?;
    let value = predictive_loglik(&model.params, &model.kernel, &train, &test)?;
    println!("{value}");
    Ok(())
}

fn run_split(a: SplitArgs) -> Result<()> {
    let seq = load_events(&a.events)?;
    let (train, test) = harness::split_train_test(&seq, a.fraction)?;
    write_events(&a.train, &train)?;
    write_events(&a.test, &test)?;
    println!("train {} events over [0, {}), test {} events", train.len(), train.horizon(), test.len());
    Ok(())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| HawkesError::Io { path: path.into(), source })
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.threads {
        cfg.threads = Some(t);
    }
    if let Some(g) = a.graphs {
        cfg.replications.graphs = g;
    }
    if let Some(s) = a.sims {
        cfg.replications.sims = s;
    }
    cfg.validate()?;
    create_dir(&a.out)?;
    let outcomes = harness::run_tasks(&cfg)?;
    let mut rows: Vec<_> = outcomes.iter().flat_map(|o| o.rows.clone()).collect();
    harness::sort_rows(&mut rows);
    write_results(&a.out.join("results.csv"), &rows)?;
    write_timings(&a.out.join("timings.csv"), &outcomes, &cfg)?;
    let plots = emit_plot_data(&rows, &a.out)?;
    let manifest = json!({
        "version": FORMAT_VERSION,
        "config": cfg,
        "results": "results.csv",
        "timings": "timings.csv",
        "plots": plots.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy()).collect::<Vec<_>>(),
    });
    write_json(&a.out.join("manifest.json"), &manifest)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    info!("wrote {} rows ({failed} failed)", rows.len());
    for agg in harness::aggregate(&rows) {
        println!("{:<16} {:>8} {:<20} {:.4} +- {:.4} (n={})", agg.metric, agg.sweep_value, agg.estimator, agg.mean, agg.std, agg.n);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::FitMle(a) => run_fit_mle(a),
        Command::FitVi(a) => run_fit_vi(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Predict(a) => run_predict(a),
        Command::Split(a) => run_split(a),
        Command::Sweep(a) => run_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
