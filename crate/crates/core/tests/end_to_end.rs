use approx::assert_abs_diff_eq;
use ndarray::{array, Array1};
use proptest::prelude::*;
use youden_napg::baseline::lasso_logistic_fit;
use youden_napg::data::{load_dataset, split_train_test, write_dataset};
use youden_napg::objective::{empirical_weighted_youden, ObjectiveContext};
use youden_napg::penalty::{prox_g, stationarity_residual};
use youden_napg::pipeline::{self, evaluate, fit, fit_fixed, FitOptions};
use youden_napg::simgen::{generate_s1, generate_s2, true_omega, ScenarioConstants, ScenarioId};
use youden_napg::solver::{solve, solve_backtracking, solve_papg, SolverConfig, Termination};
use youden_napg::{BiomarkerDataset, HyperParams, RulePoint};

#[test]
fn csv_round_trip_preserves_the_fit() {
    let (data, _) = generate_s1(200, 21).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s1.csv");
    write_dataset(&path, &data).unwrap();
    let back = load_dataset(&path, "label", "1").unwrap();
    assert_eq!(back.diseased(), data.diseased());
    assert_eq!(back.healthy(), data.healthy());
    assert_eq!(back.feature_labels(), data.feature_labels());

    let options = FitOptions { lambda: Some(0.1), ..FitOptions::default() };
    let a = fit(&data, 0.5, &options).unwrap();
    let b = fit(&back, 0.5, &options).unwrap();
    assert_eq!(a.rule, b.rule);
}

#[test]
fn separable_data_reaches_perfect_youden() {
    let diseased = array![[3.0, 0.1], [4.0, -0.3], [3.5, 0.7], [5.0, 0.2]];
    let healthy = array![[0.0, 0.4], [-1.0, -0.2], [0.5, 0.9], [1.0, -0.6]];
    let data = BiomarkerDataset::new(diseased, healthy, None).unwrap();
    let options = FitOptions { lambda: Some(0.01), ..FitOptions::default() };
    let result = fit(&data, 0.5, &options).unwrap();
    assert_eq!(result.train_metrics.weighted_youden, 1.0);
    assert!(result.rule.omega[0] > 0.0);
}

#[test]
fn all_solvers_reach_stationarity_on_scenario_one() {
    let (data, _) = generate_s1(400, 7).unwrap();
    let h = pipeline::default_bandwidth(data.n_diseased(), data.n_healthy());
    let ctx = ObjectiveContext::new(&data, 0.5, h).unwrap();
    let hyper = HyperParams::new(0.5, h, 0.1).unwrap();
    let init = pipeline::initialize(&data);
    let config = SolverConfig { tol_f_rel: 0.0, max_iter: 20_000, ..SolverConfig::default() };
    let poly = solve(&init, &ctx, &hyper, &config);
    let back = solve_backtracking(&init, &ctx, &hyper, &config);
    let papg = solve_papg(&init, &ctx, &hyper, &config);
    for out in [&poly, &back, &papg] {
        assert_eq!(out.termination, Termination::Residual);
        assert!(stationarity_residual(&out.rule, &ctx, &hyper) <= 1e-6);
    }
    let first = |t: &youden_napg::solver::SolverTrace| t.first_below(1e-4).unwrap().cum_grad_evals;
    assert!(first(&poly.trace) < first(&papg.trace));
}

#[test]
fn fitted_rule_beats_the_initial_rule() {
    let (data, _) = generate_s1(600, 13).unwrap();
    let (train, test) = split_train_test(&data, 0.5, 13).unwrap();
    let init = pipeline::normalize_rule(&pipeline::initialize(&train)).0;
    let result = fit(&train, 0.5, &FitOptions { seed: 13, ..FitOptions::default() }).unwrap();
    let before = empirical_weighted_youden(&init, &train, 0.5).weighted_youden;
    assert!(result.train_metrics.weighted_youden >= before);
    let truth = true_omega(ScenarioId::S1, &ScenarioConstants::default());
    let m = evaluate(&result.rule, &test, 0.5, Some(truth.view())).unwrap();
    assert_eq!(m.detection_rate, Some(1.0));
    assert!(m.weighted_youden > 0.8);
}

#[test]
fn weights_agree_with_the_truth_in_sign() {
    let (data, _) = generate_s1(2000, 3).unwrap();
    let fit = fit_fixed(&data, 0.5, 0.1, &FitOptions::default()).unwrap();
    let truth = true_omega(ScenarioId::S1, &ScenarioConstants::default());
    for (w, t) in fit.rule.omega.iter().zip(&truth) {
        if *t != 0.0 {
            assert_eq!(w.signum(), t.signum());
        }
    }
    // direction close to the truth
    let cos = fit.rule.omega.dot(&truth) / truth.dot(&truth).sqrt();
    assert!(cos > 0.95, "cosine {cos}");
}

#[test]
fn both_methods_fit_scenario_two() {
    let (data, _) = generate_s2(400, 2).unwrap();
    let (train, test) = split_train_test(&data, 0.5, 2).unwrap();
    let options = FitOptions { lambda_grid: vec![0.5, 0.05], folds: 3, seed: 2, ..FitOptions::default() };
    let ours = fit(&train, 0.5, &options).unwrap();
    let lasso = lasso_logistic_fit(&train, 0.5, &options).unwrap();
    for rule in [&ours.rule, &lasso.rule] {
        assert_abs_diff_eq!(rule.omega_norm(), 1.0, epsilon = 1e-12);
        let m = evaluate(rule, &test, 0.5, None).unwrap();
        assert!(m.weighted_youden > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prox_never_increases_the_penalized_model(
        w in prop::collection::vec(-8.0..8.0f64, 1..6),
        c in -3.0..3.0f64,
        step in 0.01..10.0f64,
        lambda in 0.0..2.0f64,
    ) {
        let hyper = HyperParams::new(0.5, 1.0, lambda).unwrap();
        let v = RulePoint::new(Array1::from(w), c);
        let z = prox_g(&v, step, &hyper);
        let model = |x: &RulePoint| {
            let pen = youden_napg::penalty::ScadRidgePenalty::from_hyper(&hyper);
            let d = &x.to_vector() - &v.to_vector();
            youden_napg::solver::ProxTerm::value(&pen, x.to_vector().view()) + d.dot(&d) / (2.0 * step)
        };
        prop_assert!(model(&z) <= model(&v) + 1e-12);
        prop_assert!(model(&z) <= model(&RulePoint::new(Array1::zeros(v.dim()), 0.0)) + 1e-12);
    }

    #[test]
    fn split_partitions_each_group(seed in 0u64..1000, fraction in 0.1..0.9f64) {
        let (data, _) = generate_s1(80, seed).unwrap();
        let (train, test) = split_train_test(&data, fraction, seed).unwrap();
        prop_assert_eq!(train.n_diseased() + test.n_diseased(), data.n_diseased());
        prop_assert_eq!(train.n_healthy() + test.n_healthy(), data.n_healthy());
        prop_assert!(train.n_diseased() >= 1 && test.n_diseased() >= 1);
        let sum = |d: &BiomarkerDataset| d.diseased().sum() + d.healthy().sum();
        prop_assert!((sum(&train) + sum(&test) - sum(&data)).abs() < 1e-9);
    }
}
