//! `youden-napg` command-line tool.
//!
//! Exit codes: 0 on success, 1 on data or runtime errors, 2 on invalid
//! arguments.

mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use ndarray::Array1;
use serde::Serialize;
use youden_napg::baseline::lasso_logistic_fit;
use youden_napg::data::{load_dataset, write_dataset, BiomarkerDataset, HyperParams, RulePoint};
use youden_napg::objective::ObjectiveContext;
use youden_napg::pipeline::{self, evaluate, FitOptions, FitReport, DEFAULT_LAMBDA_GRID};
use youden_napg::simgen::{self, Method, ReplicationConfig, ScenarioConstants, ScenarioId};
use youden_napg::solver::{solve_configured, SolverTrace, Variant};
use youden_napg::{Error, EvalMetrics};

use args::{BenchArgs, Cli, Command, CvArgs, DataOpts, EvalArgs, FitArgs, MethodArg, ModelOpts, SimulateArgs};

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Cv(a) => cv(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn method(m: MethodArg) -> Method {
    match m {
        MethodArg::Ours => Method::Ours,
        MethodArg::LassoLogistic => Method::LassoLogistic,
    }
}

/// Check every numeric option before any work starts.
fn fit_options(m: &ModelOpts) -> CliResult<FitOptions> {
    HyperParams::new(m.pi, 1.0, 0.0).map_err(usage)?;
    let options = FitOptions {
        bandwidth: m.bandwidth,
        lambda: m.lambda,
        lambda_grid: m.lambda_grid.clone().unwrap_or_else(|| DEFAULT_LAMBDA_GRID.to_vec()),
        folds: m.folds,
        seed: m.seed,
        solver: m.solver_opts.config(m.solver.into()),
        ..FitOptions::default()
    };
    options.validate().map_err(usage)?;
    Ok(options)
}

fn load(d: &DataOpts) -> CliResult<BiomarkerDataset> {
    Ok(load_dataset(&d.data, &d.label_column, &d.positive_label)?)
}

fn out_dir(dir: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn truth_vector(truth: &Option<Vec<f64>>, p: usize) -> CliResult<Option<Array1<f64>>> {
    match truth {
        None => Ok(None),
        Some(t) if t.len() != p => Err(usage(format!("--truth has {} entries, data has {p} markers", t.len()))),
        Some(t) => Ok(Some(Array1::from(t.clone()))),
    }
}

fn print_metrics(label: &str, m: &EvalMetrics) {
    print!(
        "{label}: J = {:.4}, Se = {:.4}, Sp = {:.4}, nonzero = {}",
        m.weighted_youden, m.sensitivity, m.specificity, m.nonzero_count
    );
    if let (Some(d), Some(s)) = (m.detection_rate, m.shrinkage_accuracy) {
        print!(", detection = {d:.4}, shrinkage = {s:.4}");
    }
    println!();
}

fn print_rule(names: &[String], rule: &RulePoint) {
    let terms: Vec<String> = names
        .iter()
        .zip(rule.omega.iter())
        .filter(|(_, w)| **w != 0.0)
        .map(|(n, w)| format!("{w:+.6}·{n}"))
        .collect();
    let lhs = if terms.is_empty() { "0".to_string() } else { terms.join(" ") };
    println!("rule: {lhs} > {:.6}", rule.cutoff);
}

fn simulate(a: SimulateArgs) -> CliResult {
    let options = fit_options(&a.model)?;
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    if a.n < 4 {
        return Err(usage("--n must be at least 4"));
    }
    let constants = ScenarioConstants { s3_features: a.features, ..ScenarioConstants::default() };
    constants.validate().map_err(usage)?;
    let scenario = ScenarioId::from(a.scenario);
    let dir = out_dir(&a.out_dir)?;

    if !a.no_data {
        for r in 0..a.reps {
            let (sample, _) = simgen::simulate(scenario, a.n, a.model.seed, r as u64 + 1, &constants)?;
            let path = dir.join(format!("{scenario}_n{}_seed{}_rep{r}.csv", a.n, a.model.seed));
            write_dataset(&path, &sample.to_dataset()?)?;
        }
    }
    let config = ReplicationConfig {
        scenario,
        n: a.n,
        reps: a.reps,
        pi: a.model.pi,
        method: method(a.model.method),
        seed: a.model.seed,
        constants,
        fit: options,
    };
    let study = simgen::run_replications(&config)?;
    for (r, o) in study.outcomes.iter().enumerate() {
        if let Err(e) = o {
            eprintln!("replication {r} failed: {e}");
        }
    }
    simgen::write_summary_csv(dir.join("summary.csv"), std::slice::from_ref(&study.summary))?;
    let spec = serde_json::json!({
        "scenario": scenario,
        "n": a.n,
        "reps": a.reps,
        "seed": a.model.seed,
        "true_omega": simgen::true_omega(scenario, &constants).to_vec(),
        "constants": constants,
    });
    write_json(&dir.join("scenario.json"), &spec)?;
    let s = &study.summary;
    println!(
        "{scenario} n = {} {}: mean train J = {:.4}, mean test J = {:.4}, detection = {:.4}, shrinkage = {:.4}, {} of {} replications ok",
        s.sample_size, s.method, s.mean_train_j, s.mean_test_j, s.detection_rate, s.shrinkage_accuracy, s.reps_ok, a.reps
    );
    if s.reps_ok == 0 {
        return Err(Failure::Runtime(Error::Simulation("every replication failed".into())));
    }
    Ok(())
}

fn fit(a: FitArgs) -> CliResult {
    let mut options = fit_options(&a.model)?;
    let train = load(&a.input)?;
    let truth = truth_vector(&a.truth, train.n_features())?;
    if let Some(path) = &a.validation {
        options.validation = Some(load_dataset(path, &a.input.label_column, &a.input.positive_label)?);
    }
    let test = match &a.test {
        Some(path) => Some(load_dataset(path, &a.input.label_column, &a.input.positive_label)?),
        None => None,
    };
    let pi = a.model.pi;
    let (rule, trace, report) = match method(a.model.method) {
        Method::Ours => {
            let f = pipeline::fit(&train, pi, &options)?;
            (f.rule.clone(), f.trace.clone(), f.report(&train, None))
        }
        Method::LassoLogistic => {
            let f = lasso_logistic_fit(&train, pi, &options)?;
            (f.rule.clone(), f.trace.clone(), f.report(&train, None))
        }
    };
    let train_metrics = evaluate(&rule, &train, pi, truth.as_ref().map(|t| t.view()))?;
    let test_metrics = match &test {
        Some(t) => Some(evaluate(&rule, t, pi, truth.as_ref().map(|t| t.view()))?),
        None => None,
    };
    let report = FitReport { metrics: train_metrics.clone(), test_metrics: test_metrics.clone(), ..report };

    let dir = out_dir(&a.out_dir)?;
    write_json(&dir.join("fit_result.json"), &report)?;
    trace.write_csv(dir.join("trace.csv"))?;

    print_rule(&report.feature_names, &rule);
    println!("lambda = {}, degenerate = {}", report.lambda, report.degenerate);
    print_metrics("train", &train_metrics);
    if let Some(m) = &test_metrics {
        print_metrics("test", m);
    }
    Ok(())
}

fn cv(a: CvArgs) -> CliResult {
    let options = fit_options(&a.model)?;
    let train = load(&a.input)?;
    let pi = a.model.pi;
    let options = FitOptions { lambda: None, ..options };
    let table = match method(a.model.method) {
        Method::Ours => {
            pipeline::cross_validate(&train, pi, &options.lambda_grid, options.folds, options.seed, &options)?.1
        }
        Method::LassoLogistic => lasso_logistic_fit(&train, pi, &options)?.cv_table,
    };
    let best = pipeline::select_lambda(&table);
    let dir = out_dir(&a.out_dir)?;
    let mut w = csv::Writer::from_path(dir.join("cv_table.csv")).map_err(Error::from)?;
    let mut header = vec!["lambda".to_string(), "mean_youden".to_string()];
    header.extend((0..options.folds).map(|k| format!("fold{k}")));
    w.write_record(&header).map_err(Error::from)?;
    for row in &table {
        let mut rec = vec![row.lambda.to_string(), row.mean_youden.to_string()];
        rec.extend(row.fold_youden.iter().map(f64::to_string));
        w.write_record(&rec).map_err(Error::from)?;
    }
    w.flush()?;
    for row in &table {
        println!("lambda = {:<8} mean J = {:.4}", row.lambda, row.mean_youden);
    }
    println!("selected lambda = {best}");
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let text = fs::read_to_string(&a.rule)?;
    let report: FitReport = serde_json::from_str(&text).map_err(Error::from)?;
    let pi = a.pi.unwrap_or(report.pi);
    HyperParams::new(pi, 1.0, 0.0).map_err(usage)?;
    let data = load(&a.input)?;
    let truth = truth_vector(&a.truth, data.n_features())?;
    let rule = RulePoint::new(Array1::from(report.omega.clone()), report.cutoff);
    let m = evaluate(&rule, &data, pi, truth.as_ref().map(|t| t.view()))?;
    print_metrics("eval", &m);
    if let Some(dir) = &a.out_dir {
        let dir = out_dir(dir)?;
        write_json(&dir.join("eval.json"), &m)?;
    }
    Ok(())
}

/// Label used in bench file names and the combined CSV.
fn solver_label(v: Variant) -> &'static str {
    match v {
        Variant::NapgPoly => "napg_poly",
        Variant::NapgBacktracking => "napg_backtracking",
        Variant::Papg => "papg",
    }
}

fn bench(a: BenchArgs) -> CliResult {
    let base = a.solver.config(Variant::NapgPoly);
    base.validate().map_err(usage)?;
    let data = match &a.data {
        Some(path) => load_dataset(path, &a.label_column, &a.positive_label)?,
        None => {
            if a.n < 4 {
                return Err(usage("--n must be at least 4"));
            }
            simgen::generate(a.scenario.into(), a.n, a.seed)?.0
        }
    };
    let h = a
        .bandwidth
        .unwrap_or_else(|| pipeline::default_bandwidth(data.n_diseased(), data.n_healthy()));
    let hyper = HyperParams { bandwidth: h, ..HyperParams::new(a.pi, h, a.lambda).map_err(usage)? };
    let ctx = ObjectiveContext::new(&data, a.pi, h)?;
    let init = pipeline::initialize(&data);

    let dir = out_dir(&a.out_dir)?;
    let mut combined = csv::Writer::from_path(dir.join("bench_combined.csv")).map_err(Error::from)?;
    combined
        .write_record(["solver", "iter", "f_value", "residual", "cum_grad_evals"])
        .map_err(Error::from)?;
    for variant in Variant::ALL {
        let config = youden_napg::solver::SolverConfig { variant, ..base.clone() };
        let out = solve_configured(&init, &ctx, &hyper, &config);
        let label = solver_label(variant);
        out.trace.write_csv(dir.join(format!("trace_{label}.csv")))?;
        for r in &out.trace.records {
            combined
                .write_record([
                    label.to_string(),
                    r.iter.to_string(),
                    r.f_value.to_string(),
                    r.residual.to_string(),
                    r.cum_grad_evals.to_string(),
                ])
                .map_err(Error::from)?;
        }
        report_bench(label, &out.trace);
    }
    combined.flush()?;
    Ok(())
}

fn report_bench(label: &str, trace: &SolverTrace) {
    let last = trace.last().expect("trace has an initial row");
    let reach = trace
        .first_below(1e-4)
        .map_or("not reached".to_string(), |r| format!("{} gradients", r.cum_grad_evals));
    println!(
        "{label:<18} iterations = {:<5} F = {:.10} residual = {:.3e} residual <= 1e-4: {reach}",
        last.iter, last.f_value, last.residual
    );
}
