//! Seeded simulation scenarios and the Monte Carlo replication harness.
//!
//! * `s1`: ten independent standard normal markers, logistic link, zero
//!   intercept.
//! * `s2`: four skewed or heavy-tailed markers (χ²₃, Gamma(2, 1), Exp(1),
//!   t₅) tied by a Gaussian copula, plus six independent normals; asymmetric
//!   link on the standardized true score.
//! * `s3`: AR(1) Gaussian markers with sinusoidal perturbation of every
//!   marker outside the true support; same link as `s2`.
//!
//! Every constant of `s2` and `s3` lives in [`ScenarioConstants`]. They are
//! this crate's concrete choices, so results on those scenarios are
//! comparable across runs of this crate but not to other implementations.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Exp, Gamma, StudentsT};

use crate::baseline::lasso_logistic_fit;
use crate::data::{split_train_test, BiomarkerDataset, EvalMetrics, RulePoint};
use crate::error::{validation, Error, Result};
use crate::normal;
use crate::parallel::map_ordered;
use crate::pipeline::{evaluate, fit, FitOptions};

/// Scenario identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioId {
    S1,
    S2,
    S3,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 3] = [ScenarioId::S1, ScenarioId::S2, ScenarioId::S3];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::S1 => "s1",
            ScenarioId::S2 => "s2",
            ScenarioId::S3 => "s3",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s1" => Ok(ScenarioId::S1),
            "s2" => Ok(ScenarioId::S2),
            "s3" => Ok(ScenarioId::S3),
            other => Err(validation(format!("unknown scenario `{other}` (expected s1, s2 or s3)"))),
        }
    }
}

/// Generator constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConstants {
    /// Pairwise correlation of the `s2` Gaussian copula.
    pub copula_rho: f64,
    /// Lag-one correlation of the `s3` markers.
    pub ar_rho: f64,
    /// Number of `s3` markers (at least 10).
    pub s3_features: usize,
    /// Amplitude of `sin(T₁)` added to `s3` markers beyond the support.
    pub perturb_amplitude: f64,
    /// Standard deviation of the noise added to the standardized score.
    pub link_noise_sd: f64,
    /// `G(u) = w·σ(a·u) + (1 − w)·Φ(u − b)`: weight `w`.
    pub link_logistic_weight: f64,
    /// Slope `a` of the logistic component.
    pub link_logistic_slope: f64,
    /// Shift `b` of the probit component.
    pub link_probit_shift: f64,
    /// Regeneration attempts after a draw with an empty group.
    pub max_retries: u32,
}

impl Default for ScenarioConstants {
    fn default() -> Self {
        Self {
            copula_rho: 0.3,
            ar_rho: 0.5,
            s3_features: 500,
            perturb_amplitude: 0.3,
            link_noise_sd: 0.5,
            link_logistic_weight: 0.85,
            link_logistic_slope: 1.5,
            link_probit_shift: 1.0,
            max_retries: 10,
        }
    }
}

impl ScenarioConstants {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.copula_rho) {
            return Err(validation(format!("copula correlation must lie in [0, 1), got {}", self.copula_rho)));
        }
        if !(self.ar_rho > -1.0 && self.ar_rho < 1.0) {
            return Err(validation(format!("AR(1) correlation must lie in (-1, 1), got {}", self.ar_rho)));
        }
        if self.s3_features < 10 {
            return Err(validation(format!("s3 needs at least 10 markers, got {}", self.s3_features)));
        }
        if !(self.link_noise_sd >= 0.0) || !(0.0..=1.0).contains(&self.link_logistic_weight) {
            return Err(validation("link constants out of range"));
        }
        Ok(())
    }

    /// Asymmetric link `G(u) = w·σ(a·u) + (1 − w)·Φ(u − b)`.
    pub fn link(&self, u: f64) -> f64 {
        let w = self.link_logistic_weight;
        w * normal::sigmoid(self.link_logistic_slope * u) + (1.0 - w) * normal::cdf(u - self.link_probit_shift)
    }
}

/// True coefficient vector of a scenario.
pub fn true_omega(id: ScenarioId, consts: &ScenarioConstants) -> Array1<f64> {
    match id {
        ScenarioId::S1 => Array1::from(vec![4.0, 0.0, 6.0, 0.0, 0.0, 7.0, 0.0, 8.0, 0.0, 0.0]),
        ScenarioId::S2 => Array1::from(vec![-5.0, -4.0, -4.5, 3.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ScenarioId::S3 => {
            let mut w = Array1::zeros(consts.s3_features);
            let head = [-5.0, 4.5, -4.5, 3.5, -3.0, 2.5, -2.0, 1.5, -1.0, 0.5];
            w.slice_mut(s![..10]).assign(&Array1::from(head.to_vec()));
            w
        }
    }
}

/// Description of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub n_total: usize,
    /// Requested seed.
    pub seed: u64,
    /// RNG substream; 0 for standalone draws, `r + 1` for replication `r`.
    pub stream: u64,
    /// Regenerations needed to get both groups non-empty.
    pub retries: u32,
    pub true_omega: Array1<f64>,
    pub constants: ScenarioConstants,
}

/// Everything drawn for one dataset, in row order.
#[derive(Debug, Clone)]
pub struct SimulatedSample {
    /// `n × p` markers.
    pub features: Array2<f64>,
    /// Link noise; zero for `s1`.
    pub noise: Array1<f64>,
    /// Argument of the link: `ω₀ᵀT` for `s1`, standardized score plus noise otherwise.
    pub link_input: Array1<f64>,
    /// Uniform draws; row `i` is diseased iff `uniforms[i] < link(link_input[i])`.
    pub uniforms: Array1<f64>,
    pub labels: Vec<bool>,
}

impl SimulatedSample {
    /// Success probability of every row under the scenario's link.
    pub fn probabilities(&self, id: ScenarioId, consts: &ScenarioConstants) -> Array1<f64> {
        match id {
            ScenarioId::S1 => self.link_input.mapv(normal::sigmoid),
            _ => self.link_input.mapv(|u| consts.link(u)),
        }
    }

    /// Partition rows by label.
    pub fn to_dataset(&self) -> Result<BiomarkerDataset> {
        let rows = |want: bool| -> Vec<usize> { (0..self.labels.len()).filter(|&i| self.labels[i] == want).collect() };
        let d = self.features.select(Axis(0), &rows(true));
        let h = self.features.select(Axis(0), &rows(false));
        let names = (1..=self.features.ncols()).map(|j| format!("T{j}")).collect();
        BiomarkerDataset::new(d, h, Some(names))
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || rng.sample(StandardNormal))
}

/// `(s − mean)/sd` with the sample standard deviation.
fn standardize(s: &Array1<f64>) -> Array1<f64> {
    let n = s.len() as f64;
    let mean = s.sum() / n;
    let var = s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    if sd > 0.0 {
        s.mapv(|x| (x - mean) / sd)
    } else {
        Array1::zeros(s.len())
    }
}

/// `u` kept away from 0 and 1 so quantile functions stay finite.
fn open_unit(u: f64) -> f64 {
    u.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

fn s2_features(rng: &mut ChaCha8Rng, n: usize, consts: &ScenarioConstants) -> Array2<f64> {
    let rho = consts.copula_rho;
    let chi2 = ChiSquared::new(3.0).unwrap();
    let gamma = Gamma::new(2.0, 1.0).unwrap();
    let exp = Exp::new(1.0).unwrap();
    let t5 = StudentsT::new(0.0, 1.0, 5.0).unwrap();
    let mut t = Array2::<f64>::zeros((n, 10));
    for mut row in t.rows_mut() {
        let shared: f64 = rng.sample(StandardNormal);
        let mut z = [0.0; 4];
        for zj in &mut z {
            let own: f64 = rng.sample(StandardNormal);
            *zj = rho.sqrt() * shared + (1.0 - rho).sqrt() * own;
        }
        let u = z.map(|x| open_unit(normal::cdf(x)));
        row[0] = chi2.inverse_cdf(u[0]);
        row[1] = gamma.inverse_cdf(u[1]);
        row[2] = exp.inverse_cdf(u[2]);
        row[3] = t5.inverse_cdf(u[3]);
        for j in 4..10 {
            row[j] = rng.sample(StandardNormal);
        }
    }
    t
}

fn s3_features(rng: &mut ChaCha8Rng, n: usize, consts: &ScenarioConstants) -> Array2<f64> {
    let p = consts.s3_features;
    let rho = consts.ar_rho;
    let innov = (1.0 - rho * rho).sqrt();
    let mut t = Array2::<f64>::zeros((n, p));
    for mut row in t.rows_mut() {
        row[0] = rng.sample(StandardNormal);
        for j in 1..p {
            let e: f64 = rng.sample(StandardNormal);
            row[j] = rho * row[j - 1] + innov * e;
        }
        let bump = consts.perturb_amplitude * row[0].sin();
        row.slice_mut(s![10..]).mapv_inplace(|x| x + bump);
    }
    t
}

fn draw(id: ScenarioId, n: usize, rng: &mut ChaCha8Rng, consts: &ScenarioConstants) -> SimulatedSample {
    let omega = true_omega(id, consts);
    let features = match id {
        ScenarioId::S1 => normal_matrix(rng, n, 10),
        ScenarioId::S2 => s2_features(rng, n, consts),
        ScenarioId::S3 => s3_features(rng, n, consts),
    };
    let score = features.dot(&omega);
    let (noise, link_input) = match id {
        ScenarioId::S1 => (Array1::zeros(n), score),
        _ => {
            let noise = Array1::from_shape_simple_fn(n, || consts.link_noise_sd * rng.sample::<f64, _>(StandardNormal));
            let input = standardize(&score) + &noise;
            (noise, input)
        }
    };
    let uniforms = Array1::from_shape_simple_fn(n, || rng.random::<f64>());
    let mut sample = SimulatedSample { features, noise, link_input, uniforms, labels: Vec::new() };
    let prob = sample.probabilities(id, consts);
    sample.labels = sample.uniforms.iter().zip(&prob).map(|(u, p)| u < p).collect();
    sample
}

/// Draw one dataset on substream `stream` of `seed`.
///
/// A draw with an empty group is repeated with the seed incremented, up to
/// `consts.max_retries` times.
pub fn simulate(
    id: ScenarioId,
    n: usize,
    seed: u64,
    stream: u64,
    consts: &ScenarioConstants,
) -> Result<(SimulatedSample, ScenarioSpec)> {
    if n < 4 {
        return Err(validation(format!("need at least 4 observations, got {n}")));
    }
    consts.validate()?;
    for retries in 0..=consts.max_retries {
        let mut rng = rng_for(seed.wrapping_add(u64::from(retries)), stream);
        let sample = draw(id, n, &mut rng, consts);
        let n1 = sample.labels.iter().filter(|&&d| d).count();
        if n1 > 0 && n1 < n {
            let spec = ScenarioSpec {
                id,
                n_total: n,
                seed,
                stream,
                retries,
                true_omega: true_omega(id, consts),
                constants: *consts,
            };
            return Ok((sample, spec));
        }
    }
    Err(Error::Simulation(format!(
        "{id}: every draw of {n} rows left a group empty after {} retries",
        consts.max_retries
    )))
}

/// Draw a dataset of scenario `id` with default constants.
pub fn generate(id: ScenarioId, n: usize, seed: u64) -> Result<(BiomarkerDataset, ScenarioSpec)> {
    generate_with(id, n, seed, &ScenarioConstants::default())
}

/// Draw a dataset of scenario `id` with explicit constants.
pub fn generate_with(
    id: ScenarioId,
    n: usize,
    seed: u64,
    consts: &ScenarioConstants,
) -> Result<(BiomarkerDataset, ScenarioSpec)> {
    let (sample, spec) = simulate(id, n, seed, 0, consts)?;
    Ok((sample.to_dataset()?, spec))
}

pub fn generate_s1(n: usize, seed: u64) -> Result<(BiomarkerDataset, ScenarioSpec)> {
    generate(ScenarioId::S1, n, seed)
}

pub fn generate_s2(n: usize, seed: u64) -> Result<(BiomarkerDataset, ScenarioSpec)> {
    generate(ScenarioId::S2, n, seed)
}

pub fn generate_s3(n: usize, seed: u64) -> Result<(BiomarkerDataset, ScenarioSpec)> {
    generate(ScenarioId::S3, n, seed)
}

/// Estimation method compared in replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ours,
    LassoLogistic,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::LassoLogistic => "lasso_logistic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Method::Ours),
            "lasso-logistic" | "lasso_logistic" => Ok(Method::LassoLogistic),
            other => Err(validation(format!("unknown method `{other}` (expected ours or lasso-logistic)"))),
        }
    }
}

/// Fit `train` with `method` and return the normalized rule and chosen λ.
pub fn fit_method(method: Method, train: &BiomarkerDataset, pi: f64, options: &FitOptions) -> Result<(RulePoint, f64)> {
    match method {
        Method::Ours => fit(train, pi, options).map(|f| (f.rule, f.lambda_selected)),
        Method::LassoLogistic => lasso_logistic_fit(train, pi, options).map(|f| (f.rule, f.lambda_selected)),
    }
}

/// Settings of a replication study.
#[derive(Debug, Clone)]
pub struct ReplicationConfig {
    pub scenario: ScenarioId,
    pub n: usize,
    pub reps: usize,
    pub pi: f64,
    pub method: Method,
    pub seed: u64,
    pub constants: ScenarioConstants,
    /// Fold seeds are derived per replication; `fit.seed` is ignored.
    pub fit: FitOptions,
}

/// Result of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub rep: usize,
    pub rule: RulePoint,
    pub lambda: f64,
    pub train: EvalMetrics,
    pub test: EvalMetrics,
}

/// Seed for the split and CV folds of replication `rep`.
pub fn replication_seed(seed: u64, rep: usize) -> u64 {
    seed ^ (rep as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Generate, split 50/50, fit and evaluate one replication.
pub fn run_replication(config: &ReplicationConfig, rep: usize) -> Result<RepOutcome> {
    let (sample, spec) = simulate(config.scenario, config.n, config.seed, rep as u64 + 1, &config.constants)?;
    let data = sample.to_dataset()?;
    let sub_seed = replication_seed(config.seed, rep);
    let (train, test) = split_train_test(&data, 0.5, sub_seed)?;
    let options = FitOptions { seed: sub_seed, ..config.fit.clone() };
    let (rule, lambda) = fit_method(config.method, &train, config.pi, &options)?;
    let truth = Some(spec.true_omega.view());
    Ok(RepOutcome {
        rep,
        train: evaluate(&rule, &train, config.pi, truth)?,
        test: evaluate(&rule, &test, config.pi, truth)?,
        rule,
        lambda,
    })
}

/// Means over successful replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub scenario: ScenarioId,
    pub sample_size: usize,
    pub pi: f64,
    pub method: Method,
    pub mean_train_j: f64,
    pub mean_test_j: f64,
    pub detection_rate: f64,
    pub shrinkage_accuracy: f64,
    pub reps_ok: usize,
    pub reps_failed: usize,
}

/// Per-replication outcomes, in replication order, plus their summary.
#[derive(Debug)]
pub struct ReplicationStudy {
    pub outcomes: Vec<Result<RepOutcome>>,
    pub summary: ReplicationSummary,
}

impl ReplicationStudy {
    pub fn successes(&self) -> impl Iterator<Item = &RepOutcome> {
        self.outcomes.iter().filter_map(|o| o.as_ref().ok())
    }
}

/// Run `config.reps` independent replications, possibly concurrently.
pub fn run_replications(config: &ReplicationConfig) -> Result<ReplicationStudy> {
    if config.reps == 0 {
        return Err(validation("need at least one replication"));
    }
    config.constants.validate()?;
    let reps: Vec<usize> = (0..config.reps).collect();
    let outcomes = map_ordered(&reps, |&r| run_replication(config, r));
    let ok: Vec<&RepOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let mean = |f: &dyn Fn(&RepOutcome) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|o| f(o)).sum::<f64>() / ok.len() as f64
        }
    };
    let summary = ReplicationSummary {
        scenario: config.scenario,
        sample_size: config.n,
        pi: config.pi,
        method: config.method,
        mean_train_j: mean(&|o| o.train.weighted_youden),
        mean_test_j: mean(&|o| o.test.weighted_youden),
        detection_rate: mean(&|o| o.test.detection_rate.unwrap_or(f64::NAN)),
        shrinkage_accuracy: mean(&|o| o.test.shrinkage_accuracy.unwrap_or(f64::NAN)),
        reps_ok: ok.len(),
        reps_failed: config.reps - ok.len(),
    };
    Ok(ReplicationStudy { outcomes, summary })
}

/// Header of [`write_summary_csv`].
pub const SUMMARY_HEADER: [&str; 10] = [
    "scenario",
    "sample_size",
    "pi",
    "method",
    "mean_train_J",
    "mean_test_J",
    "detection_rate",
    "shrinkage_accuracy",
    "reps_ok",
    "reps_failed",
];

/// Write summaries as CSV.
pub fn write_summary_csv_to<W: Write>(out: W, rows: &[ReplicationSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario.to_string(),
            r.sample_size.to_string(),
            r.pi.to_string(),
            r.method.to_string(),
            r.mean_train_j.to_string(),
            r.mean_test_j.to_string(),
            r.detection_rate.to_string(),
            r.shrinkage_accuracy.to_string(),
            r.reps_ok.to_string(),
            r.reps_failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: impl AsRef<Path>, rows: &[ReplicationSummary]) -> Result<()> {
    write_summary_csv_to(std::fs::File::create(path)?, rows)
}

/// Lag-one sample correlation between neighbouring columns `j, j+1` for `j < upto − 1`.
pub fn lag_one_correlations(features: &Array2<f64>, upto: usize) -> Vec<f64> {
    (0..upto.saturating_sub(1))
        .map(|j| correlation(features.column(j), features.column(j + 1)))
        .collect()
}

fn correlation(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
