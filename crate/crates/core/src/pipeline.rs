//! End-to-end estimation: bandwidth, initialization, λ selection by
//! cross-validation, solving, normalization and evaluation.
//!
//! The solver works on the unconstrained problem; the unit-norm constraint on
//! `ω` is imposed afterwards by [`normalize_rule`], which leaves every score
//! comparison and therefore every reported metric unchanged.

use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BiomarkerDataset, EvalMetrics, HyperParams, RulePoint};
use crate::error::{validation, Error, Result};
use crate::objective::{empirical_weighted_youden, ObjectiveContext};
use crate::parallel::map_ordered;
use crate::solver::{solve_configured, SolverConfig, SolverTrace, Termination};

/// λ grid used when none is supplied.
pub const DEFAULT_LAMBDA_GRID: [f64; 8] = [10.0, 5.0, 1.0, 0.5, 0.1, 0.05, 0.01, 0.005];

/// Default number of cross-validation folds.
pub const DEFAULT_FOLDS: usize = 5;

/// Weights with magnitude below this are set to exactly zero after fitting.
pub const ZERO_SNAP: f64 = 1e-8;

/// Bandwidth rule `(n₁·n₀)^(−0.1)`.
pub fn default_bandwidth(n1: usize, n0: usize) -> f64 {
    ((n1 as f64) * (n0 as f64)).powf(-0.1)
}

/// Starting rule: direction of the class-mean difference, cutoff halfway
/// between the projected class means. Falls back to `e₁` when the means
/// coincide.
pub fn initialize(data: &BiomarkerDataset) -> RulePoint {
    let p = data.n_features();
    let mean_d = column_means(data, true);
    let mean_h = column_means(data, false);
    let diff = &mean_d - &mean_h;
    let norm = diff.dot(&diff).sqrt();
    let omega = if norm > 0.0 && norm.is_finite() {
        diff / norm
    } else {
        let mut e1 = Array1::zeros(p);
        e1[0] = 1.0;
        e1
    };
    let cutoff = 0.5 * (omega.dot(&mean_d) + omega.dot(&mean_h));
    RulePoint::new(omega, cutoff)
}

fn column_means(data: &BiomarkerDataset, diseased: bool) -> Array1<f64> {
    let x = if diseased { data.diseased() } else { data.healthy() };
    let n = x.nrows() as f64;
    Array1::from_iter(x.columns().into_iter().map(|col| col.iter().sum::<f64>() / n))
}

/// Rescale to `‖ω‖ = 1`. Returns the input unchanged and `true` when `ω = 0`.
pub fn normalize_rule(v: &RulePoint) -> (RulePoint, bool) {
    let norm = v.omega_norm();
    if norm == 0.0 {
        return (v.clone(), true);
    }
    // already unit up to rounding; dividing again would perturb the last bits
    if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
        return (v.clone(), false);
    }
    (RulePoint::new(&v.omega / norm, v.cutoff / norm), false)
}

/// Set weights with `|ω_t| < ZERO_SNAP` to exactly zero.
pub fn snap_zeros(v: &RulePoint) -> RulePoint {
    RulePoint::new(
        v.omega.mapv(|w| if w.abs() < ZERO_SNAP { 0.0 } else { w }),
        v.cutoff,
    )
}

/// Options for [`fit`] and [`cross_validate`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Smoothing bandwidth; `None` applies [`default_bandwidth`] to each fit's data.
    pub bandwidth: Option<f64>,
    /// Fixed penalty level; `None` selects one from `lambda_grid`.
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    /// Seed for fold assignment.
    pub seed: u64,
    pub lambda2: f64,
    pub scad_a: f64,
    pub solver: SolverConfig,
    /// Score λ on this set instead of by k-fold CV on the training data.
    pub validation: Option<BiomarkerDataset>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bandwidth: None,
            lambda: None,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            seed: 0,
            lambda2: HyperParams::DEFAULT_LAMBDA2,
            scad_a: HyperParams::DEFAULT_SCAD_A,
            solver: SolverConfig::default(),
            validation: None,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if let Some(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(validation(format!("bandwidth must be positive, got {h}")));
            }
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(validation(format!("lambda must be >= 0, got {l}")));
            }
        }
        if self.lambda.is_none() {
            check_grid(&self.lambda_grid)?;
        }
        if self.folds < 2 {
            return Err(validation(format!("need at least 2 folds, got {}", self.folds)));
        }
        Ok(())
    }

    fn hyper(&self, data: &BiomarkerDataset, pi: f64, lambda1: f64) -> Result<HyperParams> {
        let hyper = HyperParams {
            pi,
            bandwidth: self
                .bandwidth
                .unwrap_or_else(|| default_bandwidth(data.n_diseased(), data.n_healthy())),
            lambda1,
            lambda2: self.lambda2,
            scad_a: self.scad_a,
        };
        hyper.validate()?;
        Ok(hyper)
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(validation("lambda grid is empty"));
    }
    if let Some(l) = grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(validation(format!("lambda grid entries must be >= 0, got {l}")));
    }
    Ok(())
}

/// Mean validation score for one λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub mean_youden: f64,
    /// Per-fold validation scores, in fold order.
    pub fold_youden: Vec<f64>,
}

/// Pick the λ with the highest mean score; ties go to the larger λ.
pub fn select_lambda(table: &[CvRow]) -> f64 {
    let mut best = &table[0];
    for row in &table[1..] {
        if row.mean_youden > best.mean_youden
            || (row.mean_youden == best.mean_youden && row.lambda > best.lambda)
        {
            best = row;
        }
    }
    best.lambda
}

/// Stratified fold labels: each group is shuffled and dealt round-robin.
pub fn stratified_folds(data: &BiomarkerDataset, folds: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if folds < 2 {
        return Err(validation(format!("need at least 2 folds, got {folds}")));
    }
    let (n1, n0) = (data.n_diseased(), data.n_healthy());
    if n1 < folds || n0 < folds {
        return Err(validation(format!(
            "{folds}-fold cross-validation needs at least {folds} rows per group, got {n1} diseased and {n0} healthy"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deal = |n: usize| {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let mut fold = vec![0; n];
        for (pos, &i) in idx.iter().enumerate() {
            fold[i] = pos % folds;
        }
        fold
    };
    let d = deal(n1);
    let h = deal(n0);
    Ok((d, h))
}

/// Training and held-out datasets for every fold.
pub(crate) fn fold_datasets(
    data: &BiomarkerDataset,
    folds: usize,
    seed: u64,
) -> Result<Vec<(BiomarkerDataset, BiomarkerDataset)>> {
    let (fd, fh) = stratified_folds(data, folds, seed)?;
    (0..folds)
        .map(|k| {
            let pick = |labels: &[usize], train: bool| -> Vec<usize> {
                (0..labels.len()).filter(|&i| (labels[i] == k) != train).collect()
            };
            Ok((
                data.subset(&pick(&fd, true), &pick(&fh, true))?,
                data.subset(&pick(&fd, false), &pick(&fh, false))?,
            ))
        })
        .collect()
}

/// Output of a single fit at fixed λ.
#[derive(Debug, Clone)]
pub struct FixedFit {
    /// Snapped and normalized rule.
    pub rule: RulePoint,
    pub degenerate: bool,
    pub hyper: HyperParams,
    pub trace: SolverTrace,
    pub termination: Termination,
}

/// Fit at a fixed penalty level, without any λ selection.
pub fn fit_fixed(train: &BiomarkerDataset, pi: f64, lambda1: f64, options: &FitOptions) -> Result<FixedFit> {
    let hyper = options.hyper(train, pi, lambda1)?;
    let ctx = ObjectiveContext::new(train, pi, hyper.bandwidth)?;
    let init = initialize(train);
    let out = solve_configured(&init, &ctx, &hyper, &options.solver);
    if !out.rule.is_finite() {
        return Err(Error::Validation("solver produced a non-finite rule".into()));
    }
    let (rule, degenerate) = normalize_rule(&snap_zeros(&out.rule));
    Ok(FixedFit {
        rule,
        degenerate,
        hyper,
        trace: out.trace,
        termination: out.termination,
    })
}

/// Choose λ by stratified k-fold CV on the training data.
///
/// Each (λ, fold) cell is an independent fit on the other folds; the held-out
/// fold is scored with the empirical weighted Youden index of the normalized
/// rule.
pub fn cross_validate(
    train: &BiomarkerDataset,
    pi: f64,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
    options: &FitOptions,
) -> Result<(f64, Vec<CvRow>)> {
    check_grid(lambda_grid)?;
    let splits = fold_datasets(train, folds, seed)?;
    let cells: Vec<(usize, usize)> = (0..lambda_grid.len())
        .flat_map(|l| (0..folds).map(move |k| (l, k)))
        .collect();
    let scores = map_ordered(&cells, |&(l, k)| {
        let (fit_on, held_out) = &splits[k];
        fit_fixed(fit_on, pi, lambda_grid[l], options)
            .map(|f| empirical_weighted_youden(&f.rule, held_out, pi).weighted_youden)
    });
    let scores = scores.into_iter().collect::<Result<Vec<f64>>>()?;
    let table: Vec<CvRow> = lambda_grid
        .iter()
        .enumerate()
        .map(|(l, &lambda)| {
            let fold_youden = scores[l * folds..(l + 1) * folds].to_vec();
            CvRow {
                lambda,
                mean_youden: fold_youden.iter().sum::<f64>() / folds as f64,
                fold_youden,
            }
        })
        .collect();
    Ok((select_lambda(&table), table))
}

/// Choose λ by fitting on all of `train` and scoring on `validation`.
pub fn validate_external(
    train: &BiomarkerDataset,
    validation_set: &BiomarkerDataset,
    pi: f64,
    lambda_grid: &[f64],
    options: &FitOptions,
) -> Result<(f64, Vec<CvRow>)> {
    check_grid(lambda_grid)?;
    if validation_set.n_features() != train.n_features() {
        return Err(Error::Dimension {
            expected: train.n_features(),
            found: validation_set.n_features(),
        });
    }
    let scores = map_ordered(lambda_grid, |&lambda| {
        fit_fixed(train, pi, lambda, options)
            .map(|f| empirical_weighted_youden(&f.rule, validation_set, pi).weighted_youden)
    });
    let table = lambda_grid
        .iter()
        .zip(scores)
        .map(|(&lambda, s)| {
            let s = s?;
            Ok(CvRow { lambda, mean_youden: s, fold_youden: vec![s] })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((select_lambda(&table), table))
}

/// A fitted, normalized decision rule.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub rule: RulePoint,
    pub lambda_selected: f64,
    pub hyper: HyperParams,
    pub trace: SolverTrace,
    pub termination: Termination,
    pub train_metrics: EvalMetrics,
    /// Empty when λ was supplied.
    pub cv_table: Vec<CvRow>,
    /// The fitted `ω` is identically zero.
    pub degenerate: bool,
}

/// Full estimation pipeline on a training set.
pub fn fit(train: &BiomarkerDataset, pi: f64, options: &FitOptions) -> Result<FitResult> {
    options.validate()?;
    HyperParams::new(pi, 1.0, 0.0)?;
    let (lambda, cv_table) = match (options.lambda, &options.validation) {
        (Some(l), _) => (l, Vec::new()),
        (None, Some(val)) => validate_external(train, val, pi, &options.lambda_grid, options)?,
        (None, None) => cross_validate(train, pi, &options.lambda_grid, options.folds, options.seed, options)?,
    };
    let fixed = fit_fixed(train, pi, lambda, options)?;
    let train_metrics = empirical_weighted_youden(&fixed.rule, train, pi);
    Ok(FitResult {
        rule: fixed.rule,
        lambda_selected: lambda,
        hyper: fixed.hyper,
        trace: fixed.trace,
        termination: fixed.termination,
        train_metrics,
        cv_table,
        degenerate: fixed.degenerate,
    })
}

/// Metrics of `rule` on `test`; detection and shrinkage rates need `truth`.
pub fn evaluate(
    rule: &RulePoint,
    test: &BiomarkerDataset,
    pi: f64,
    truth: Option<ArrayView1<'_, f64>>,
) -> Result<EvalMetrics> {
    if rule.dim() != test.n_features() {
        return Err(Error::Dimension { expected: test.n_features(), found: rule.dim() });
    }
    let mut m = empirical_weighted_youden(rule, test, pi);
    if let Some(truth) = truth {
        let (det, shr) = support_recovery(rule.omega.view(), truth)?;
        m.detection_rate = det;
        m.shrinkage_accuracy = shr;
    }
    Ok(m)
}

/// `(detection rate, shrinkage accuracy)`; either is `None` when the truth has
/// no nonzero (respectively zero) entries.
pub fn support_recovery(
    estimate: ArrayView1<'_, f64>,
    truth: ArrayView1<'_, f64>,
) -> Result<(Option<f64>, Option<f64>)> {
    if estimate.len() != truth.len() {
        return Err(Error::Dimension { expected: estimate.len(), found: truth.len() });
    }
    let (mut pos, mut hit, mut neg, mut kept) = (0usize, 0usize, 0usize, 0usize);
    for (&e, &t) in estimate.iter().zip(truth) {
        if t != 0.0 {
            pos += 1;
            hit += usize::from(e != 0.0);
        } else {
            neg += 1;
            kept += usize::from(e == 0.0);
        }
    }
    let rate = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Ok((rate(hit, pos), rate(kept, neg)))
}

/// Serialized fit, shared by both methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// `"ours"` or `"lasso_logistic"`.
    pub method: String,
    pub feature_names: Vec<String>,
    pub omega: Vec<f64>,
    pub cutoff: f64,
    pub lambda: f64,
    pub pi: f64,
    /// Smoothing bandwidth; absent for the logistic baseline.
    pub h: Option<f64>,
    pub metrics: EvalMetrics,
    pub test_metrics: Option<EvalMetrics>,
    pub cv_table: Vec<CvRow>,
    pub degenerate: bool,
    pub termination: String,
    pub iterations: usize,
}

impl FitResult {
    pub fn report(&self, data: &BiomarkerDataset, test_metrics: Option<EvalMetrics>) -> FitReport {
        FitReport {
            method: "ours".into(),
            feature_names: data.feature_labels(),
            omega: self.rule.omega.to_vec(),
            cutoff: self.rule.cutoff,
            lambda: self.lambda_selected,
            pi: self.hyper.pi,
            h: Some(self.hyper.bandwidth),
            metrics: self.train_metrics.clone(),
            test_metrics,
            cv_table: self.cv_table.clone(),
            degenerate: self.degenerate,
            termination: self.termination.as_str().into(),
            iterations: self.trace.iterations(),
        }
    }
}
