//! Lasso-penalized logistic regression followed by a cutoff scan.
//!
//! The coefficients are fitted with the same NAPG solver as the main method,
//! with soft-thresholding as the proximal map and an unpenalized intercept.
//! The intercept is then absorbed into a cutoff chosen to maximize the
//! empirical weighted Youden index on the training scores.

use ndarray::{s, Array1, ArrayView1, ArrayView2};

use crate::data::{column_scores, BiomarkerDataset, EvalMetrics, RulePoint};
use crate::error::{Error, Result};
use crate::normal::sigmoid;
use crate::objective::{best_cutoff_scan, empirical_weighted_youden};
use crate::parallel::map_ordered;
use crate::penalty::soft_threshold;
use crate::pipeline::{check_grid, fold_datasets, normalize_rule, select_lambda, snap_zeros, CvRow, FitOptions, FitReport};
use crate::solver::{minimize, ProxTerm, SmoothTerm, SolverConfig, SolverTrace, Termination};

/// Logistic regression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub coefficients: Array1<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub fn zeros(p: usize) -> Self {
        Self { coefficients: Array1::zeros(p), intercept: 0.0 }
    }

    fn to_vector(&self) -> Array1<f64> {
        let p = self.coefficients.len();
        let mut v = Array1::zeros(p + 1);
        v.slice_mut(s![..p]).assign(&self.coefficients);
        v[p] = self.intercept;
        v
    }

    fn from_vector(v: ArrayView1<'_, f64>) -> Self {
        let p = v.len() - 1;
        Self { coefficients: v.slice(s![..p]).to_owned(), intercept: v[p] }
    }
}

/// `log(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Mean negative log-likelihood with diseased rows labelled 1.
pub struct LogisticLoss<'a> {
    data: &'a BiomarkerDataset,
}

impl<'a> LogisticLoss<'a> {
    pub fn new(data: &'a BiomarkerDataset) -> Self {
        Self { data }
    }

    fn linear(&self, x: ArrayView2<'_, f64>, v: ArrayView1<'_, f64>) -> Array1<f64> {
        let p = v.len() - 1;
        column_scores(x, v.slice(s![..p])) + v[p]
    }
}

/// Linear predictors at the evaluated point.
#[derive(Clone)]
pub struct LogisticCache {
    diseased: Array1<f64>,
    healthy: Array1<f64>,
}

impl SmoothTerm for LogisticLoss<'_> {
    type Cache = LogisticCache;

    fn dim(&self) -> usize {
        self.data.n_features() + 1
    }

    fn value(&self, v: ArrayView1<'_, f64>) -> (f64, LogisticCache) {
        let diseased = self.linear(self.data.diseased(), v);
        let healthy = self.linear(self.data.healthy(), v);
        let n = (diseased.len() + healthy.len()) as f64;
        let loss = diseased.iter().map(|&e| softplus(-e)).sum::<f64>() + healthy.iter().map(|&e| softplus(e)).sum::<f64>();
        (loss / n, LogisticCache { diseased, healthy })
    }

    fn gradient(&self, _v: ArrayView1<'_, f64>, cache: &LogisticCache) -> Array1<f64> {
        let n = (cache.diseased.len() + cache.healthy.len()) as f64;
        let rd = cache.diseased.mapv(|e| sigmoid(e) - 1.0);
        let rh = cache.healthy.mapv(sigmoid);
        let p = self.data.n_features();
        let mut g = Array1::zeros(p + 1);
        for (j, (cd, ch)) in self.data.diseased().columns().into_iter().zip(self.data.healthy().columns()).enumerate() {
            g[j] = (cd.dot(&rd) + ch.dot(&rh)) / n;
        }
        g[p] = (rd.sum() + rh.sum()) / n;
        g
    }
}

/// Loss and gradient `(∂/∂β, ∂/∂β₀)` of a model on a dataset.
pub fn logistic_loss_grad(model: &LogisticModel, data: &BiomarkerDataset) -> (f64, Array1<f64>) {
    let loss = LogisticLoss::new(data);
    let v = model.to_vector();
    let (f, cache) = loss.value(v.view());
    (f, loss.gradient(v.view(), &cache))
}

/// `λ‖β‖₁`, leaving the last coordinate (the intercept) free.
pub struct L1Penalty {
    pub lambda: f64,
}

impl ProxTerm for L1Penalty {
    fn value(&self, v: ArrayView1<'_, f64>) -> f64 {
        let p = v.len() - 1;
        self.lambda * v.slice(s![..p]).iter().map(|x| x.abs()).sum::<f64>()
    }

    fn prox(&self, v: ArrayView1<'_, f64>, step: f64) -> Array1<f64> {
        let p = v.len() - 1;
        let mut out = v.mapv(|x| soft_threshold(x, step * self.lambda));
        out[p] = v[p];
        out
    }
}

/// A penalized logistic fit at one λ.
#[derive(Debug, Clone)]
pub struct LassoFit {
    pub model: LogisticModel,
    pub trace: SolverTrace,
    pub termination: Termination,
}

/// Minimize the mean logistic loss plus `λ‖β‖₁` from `β = 0` and the
/// intercept at the log class ratio.
pub fn lasso_fixed(train: &BiomarkerDataset, lambda: f64, solver: &SolverConfig) -> LassoFit {
    let loss = LogisticLoss::new(train);
    let mut x0 = LogisticModel::zeros(train.n_features());
    x0.intercept = (train.n_diseased() as f64 / train.n_healthy() as f64).ln();
    let out = minimize(&loss, &L1Penalty { lambda }, x0.to_vector().view(), solver);
    LassoFit {
        model: LogisticModel::from_vector(out.x.view()),
        trace: out.trace,
        termination: out.termination,
    }
}

/// Turn fitted coefficients into a normalized rule with a scanned cutoff.
fn rule_from_model(model: &LogisticModel, train: &BiomarkerDataset, pi: f64) -> (RulePoint, bool) {
    let snapped = snap_zeros(&RulePoint::new(model.coefficients.clone(), 0.0));
    let (sd, sh) = train.scores(snapped.omega.view());
    let (cutoff, _) = best_cutoff_scan(sd.as_slice().unwrap(), sh.as_slice().unwrap(), pi);
    normalize_rule(&RulePoint::new(snapped.omega, cutoff))
}

/// Lasso-logistic comparator with λ chosen like the main method.
#[derive(Debug, Clone)]
pub struct BaselineFit {
    pub model: LogisticModel,
    /// Normalized rule `βᵀT > c`.
    pub rule: RulePoint,
    pub lambda_selected: f64,
    pub pi: f64,
    pub train_metrics: EvalMetrics,
    pub cv_table: Vec<CvRow>,
    pub degenerate: bool,
    pub trace: SolverTrace,
    pub termination: Termination,
}

impl BaselineFit {
    pub fn report(&self, data: &BiomarkerDataset, test_metrics: Option<EvalMetrics>) -> FitReport {
        FitReport {
            method: "lasso_logistic".into(),
            feature_names: data.feature_labels(),
            omega: self.rule.omega.to_vec(),
            cutoff: self.rule.cutoff,
            lambda: self.lambda_selected,
            pi: self.pi,
            h: None,
            metrics: self.train_metrics.clone(),
            test_metrics,
            cv_table: self.cv_table.clone(),
            degenerate: self.degenerate,
            termination: self.termination.as_str().into(),
            iterations: self.trace.iterations(),
        }
    }
}

fn score_lambda(fit_on: &BiomarkerDataset, held_out: &BiomarkerDataset, pi: f64, lambda: f64, solver: &SolverConfig) -> f64 {
    let fit = lasso_fixed(fit_on, lambda, solver);
    let (rule, _) = rule_from_model(&fit.model, fit_on, pi);
    empirical_weighted_youden(&rule, held_out, pi).weighted_youden
}

/// Fit the comparator. Uses `options.lambda` when set, else selects λ from
/// `options.lambda_grid` by stratified k-fold CV (or on `options.validation`).
pub fn lasso_logistic_fit(train: &BiomarkerDataset, pi: f64, options: &FitOptions) -> Result<BaselineFit> {
    options.validate()?;
    crate::data::HyperParams::new(pi, 1.0, 0.0)?;
    let solver = &options.solver;
    let (lambda, cv_table) = match (options.lambda, &options.validation) {
        (Some(l), _) => (l, Vec::new()),
        (None, Some(val)) => {
            check_grid(&options.lambda_grid)?;
            if val.n_features() != train.n_features() {
                return Err(Error::Dimension { expected: train.n_features(), found: val.n_features() });
            }
            let scores = map_ordered(&options.lambda_grid, |&l| score_lambda(train, val, pi, l, solver));
            let table: Vec<CvRow> = options
                .lambda_grid
                .iter()
                .zip(scores)
                .map(|(&lambda, s)| CvRow { lambda, mean_youden: s, fold_youden: vec![s] })
                .collect();
            (select_lambda(&table), table)
        }
        (None, None) => {
            let grid = &options.lambda_grid;
            check_grid(grid)?;
            let folds = options.folds;
            let splits = fold_datasets(train, folds, options.seed)?;
            let cells: Vec<(usize, usize)> = (0..grid.len()).flat_map(|l| (0..folds).map(move |k| (l, k))).collect();
            let scores = map_ordered(&cells, |&(l, k)| score_lambda(&splits[k].0, &splits[k].1, pi, grid[l], solver));
            let table: Vec<CvRow> = grid
                .iter()
                .enumerate()
                .map(|(l, &lambda)| {
                    let fold_youden = scores[l * folds..(l + 1) * folds].to_vec();
                    CvRow { lambda, mean_youden: fold_youden.iter().sum::<f64>() / folds as f64, fold_youden }
                })
                .collect();
            (select_lambda(&table), table)
        }
    };
    let fit = lasso_fixed(train, lambda, solver);
    let (rule, degenerate) = rule_from_model(&fit.model, train, pi);
    let train_metrics = empirical_weighted_youden(&rule, train, pi);
    Ok(BaselineFit {
        model: fit.model,
        rule,
        lambda_selected: lambda,
        pi,
        train_metrics,
        cv_table,
        degenerate,
        trace: fit.trace,
        termination: fit.termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::{scad_prox, ScadParams};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(seed: u64, n: usize, p: usize, shift: f64) -> BiomarkerDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Array2::from_shape_fn((n, p), |(_, j)| rng.random::<f64>() * 2.0 - 1.0 + if j == 0 { shift } else { 0.0 });
        let h = Array2::from_shape_fn((n + 3, p), |_| rng.random::<f64>() * 2.0 - 1.0);
        BiomarkerDataset::new(d, h, None).unwrap()
    }

    #[test]
    fn zero_model_on_balanced_data_gives_ln2() {
        let d = BiomarkerDataset::new(array![[1.0], [2.0]], array![[0.0], [5.0]], None).unwrap();
        let (loss, _) = logistic_loss_grad(&LogisticModel::zeros(1), &d);
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn separated_data_saturates() {
        let d = BiomarkerDataset::new(array![[1.0], [2.0]], array![[-1.0], [-3.0]], None).unwrap();
        let model = LogisticModel { coefficients: array![50.0], intercept: 0.0 };
        let (loss, grad) = logistic_loss_grad(&model, &d);
        assert!(loss <= 1e-10, "{loss}");
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..20 {
            let d = random_data(seed, 15, 4, 0.5);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let v = Array1::from_shape_fn(5, |_| rng.random::<f64>() * 2.0 - 1.0);
            let model = LogisticModel::from_vector(v.view());
            let (_, g) = logistic_loss_grad(&model, &d);
            for i in 0..5 {
                let eps = 1e-6;
                let mut up = v.clone();
                let mut dn = v.clone();
                up[i] += eps;
                dn[i] -= eps;
                let fd = (logistic_loss_grad(&LogisticModel::from_vector(up.view()), &d).0
                    - logistic_loss_grad(&LogisticModel::from_vector(dn.view()), &d).0)
                    / (2.0 * eps);
                let rel = (g[i] - fd).abs() / g[i].abs().max(1e-3);
                assert!(rel <= 1e-6, "seed {seed}, coordinate {i}: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn intercept_is_not_penalized() {
        let pen = L1Penalty { lambda: 2.0 };
        let out = pen.prox(array![0.5, -3.0, 0.1].view(), 1.0);
        assert_eq!(out, array![0.0, -1.0, 0.1]);
        assert_eq!(pen.value(array![1.0, -2.0, 100.0].view()), 6.0);
    }

    #[test]
    fn overwhelming_penalty_zeroes_coefficients() {
        let d = random_data(3, 30, 4, 1.0);
        let fit = lasso_fixed(&d, 1e3, &SolverConfig::default());
        assert!(fit.model.coefficients.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn unpenalized_fit_separates_toy_data() {
        let d = BiomarkerDataset::new(array![[1.0, 0.2], [2.0, -0.4], [1.5, 0.1]], array![[-1.0, 0.3], [-2.0, 0.0], [-0.5, -0.2]], None)
            .unwrap();
        let opts = FitOptions { lambda: Some(0.0), solver: SolverConfig { max_iter: 500, ..Default::default() }, ..Default::default() };
        let fit = lasso_logistic_fit(&d, 0.5, &opts).unwrap();
        assert_eq!(fit.train_metrics.weighted_youden, 1.0);
    }

    #[test]
    fn convex_fits_reach_stationarity() {
        for (seed, lambda) in [(1, 0.0), (2, 0.01), (3, 0.05), (4, 0.1)] {
            let d = random_data(seed, 40, 5, 0.7);
            let fit = lasso_fixed(&d, lambda, &SolverConfig::default());
            let last = fit.trace.last().unwrap();
            assert!(last.residual <= 1e-6, "seed {seed}: {} ({:?})", last.residual, fit.termination);
        }
    }

    #[test]
    fn cross_validated_fit_is_normalized() {
        let d = random_data(9, 40, 5, 1.0);
        let fit = lasso_logistic_fit(&d, 0.5, &FitOptions { seed: 4, ..Default::default() }).unwrap();
        assert_eq!(fit.cv_table.len(), 8);
        if !fit.degenerate {
            assert_abs_diff_eq!(fit.rule.omega_norm(), 1.0, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn soft_threshold_agrees_with_scad_near_zero(
            lambda in 0.01f64..3.0,
            step in 0.01f64..2.0,
            frac in -1.0f64..1.0,
        ) {
            let params = ScadParams::new(lambda, 3.7);
            let x = frac * lambda * (1.0 + step);
            prop_assert!((soft_threshold(x, step * lambda) - scad_prox(x, step, params)).abs() <= 1e-12);
        }
    }
}
