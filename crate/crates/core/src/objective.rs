//! The smoothed weighted Youden objective and its empirical counterpart.
//!
//! In minimization form the smooth data term is
//!
//! ```text
//! f(ω, c) = π · mean_i Φ((c − ωᵀXᵢ)/h) − (1 − π) · mean_j Φ((c − ωᵀYⱼ)/h)
//! ```
//!
//! where `Xᵢ` are diseased and `Yⱼ` healthy observations. Replacing Φ(·/h) by
//! the indicator recovers `π(1 − Se) − (1 − π)Sp`, so the reported weighted
//! Youden index relates to the objective by `J = 2π − 1 − 2f`.

use ndarray::{s, Array1, ArrayView1};

use crate::data::{column_scores, BiomarkerDataset, EvalMetrics, RulePoint};
use crate::error::{validation, Result};
use crate::normal;
use crate::solver::SmoothTerm;

/// Binds the sensitivity weight and bandwidth to a dataset.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveContext<'a> {
    pub data: &'a BiomarkerDataset,
    pub pi: f64,
    pub bandwidth: f64,
}

/// Standardized arguments `(c − score)/h` for both groups at one point.
#[derive(Debug, Clone)]
pub struct SmoothCache {
    diseased: Array1<f64>,
    healthy: Array1<f64>,
}

impl<'a> ObjectiveContext<'a> {
    pub fn new(data: &'a BiomarkerDataset, pi: f64, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(validation(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if !(pi > 0.0 && pi < 1.0) {
            return Err(validation(format!("pi must lie in (0, 1), got {pi}")));
        }
        Ok(Self {
            data,
            pi,
            bandwidth,
        })
    }

    fn arguments(&self, omega: ArrayView1<'_, f64>, cutoff: f64) -> SmoothCache {
        let p = self.data.n_features();
        assert_eq!(omega.len(), p, "rule has {} weights but data has {p} markers", omega.len());
        let inv_h = 1.0 / self.bandwidth;
        let to_arg = |s: f64| (cutoff - s) * inv_h;
        let mut diseased = column_scores(self.data.diseased(), omega);
        diseased.mapv_inplace(to_arg);
        let mut healthy = column_scores(self.data.healthy(), omega);
        healthy.mapv_inplace(to_arg);
        SmoothCache { diseased, healthy }
    }

    fn value_from(&self, cache: &SmoothCache) -> f64 {
        let mean_cdf = |a: &Array1<f64>| a.iter().fold(0.0, |acc, &x| acc + normal::cdf(x)) / a.len() as f64;
        self.pi * mean_cdf(&cache.diseased) - (1.0 - self.pi) * mean_cdf(&cache.healthy)
    }

    fn gradient_from(&self, cache: &SmoothCache) -> Array1<f64> {
        let p = self.data.n_features();
        let n1 = self.data.n_diseased() as f64;
        let n0 = self.data.n_healthy() as f64;
        let h = self.bandwidth;
        let wd = cache.diseased.mapv(normal::pdf) * (-self.pi / (n1 * h));
        let wh = cache.healthy.mapv(normal::pdf) * ((1.0 - self.pi) / (n0 * h));
        let mut grad = Array1::zeros(p + 1);
        for j in 0..p {
            grad[j] = self.data.diseased().column(j).dot(&wd) + self.data.healthy().column(j).dot(&wh);
        }
        grad[p] = -(wd.sum() + wh.sum());
        grad
    }

    /// `f` at a stacked point `(ω, c)`.
    pub fn value_at(&self, v: ArrayView1<'_, f64>) -> f64 {
        let p = v.len() - 1;
        self.value_from(&self.arguments(v.slice(s![..p]), v[p]))
    }

    /// `∇f` at a stacked point `(ω, c)`; the last entry is ∂f/∂c.
    pub fn gradient_at(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        let p = v.len() - 1;
        self.gradient_from(&self.arguments(v.slice(s![..p]), v[p]))
    }
}

impl SmoothTerm for ObjectiveContext<'_> {
    type Cache = SmoothCache;

    fn dim(&self) -> usize {
        self.data.n_features() + 1
    }

    fn value(&self, x: ArrayView1<'_, f64>) -> (f64, SmoothCache) {
        let p = x.len() - 1;
        let cache = self.arguments(x.slice(s![..p]), x[p]);
        (self.value_from(&cache), cache)
    }

    fn gradient(&self, _x: ArrayView1<'_, f64>, cache: &SmoothCache) -> Array1<f64> {
        self.gradient_from(cache)
    }
}

/// Smooth data term `f(ω, c)` in minimization form. Lies in `[−(1−π), π]`.
///
/// # Panics
/// If the rule length differs from the number of markers.
pub fn smooth_f(v: &RulePoint, ctx: &ObjectiveContext<'_>) -> f64 {
    ctx.value_from(&ctx.arguments(v.omega.view(), v.cutoff))
}

/// Analytic gradient of [`smooth_f`], length p + 1 with ∂f/∂c last.
pub fn smooth_grad(v: &RulePoint, ctx: &ObjectiveContext<'_>) -> Array1<f64> {
    ctx.gradient_from(&ctx.arguments(v.omega.view(), v.cutoff))
}

/// Smoothed weighted Youden index, `2π − 1 − 2f`.
pub fn smoothed_weighted_youden(v: &RulePoint, ctx: &ObjectiveContext<'_>) -> f64 {
    2.0 * ctx.pi - 1.0 - 2.0 * smooth_f(v, ctx)
}

/// Weighted Youden index `2(π·Se + (1−π)·Sp) − 1`.
pub fn weighted_youden(sensitivity: f64, specificity: f64, pi: f64) -> f64 {
    2.0 * (pi * sensitivity + (1.0 - pi) * specificity) - 1.0
}

/// Empirical sensitivity (`ωᵀX > c`), specificity (`ωᵀY ≤ c`) and weighted
/// Youden index of a rule. Truth-dependent fields are left empty.
pub fn empirical_weighted_youden(v: &RulePoint, data: &BiomarkerDataset, pi: f64) -> EvalMetrics {
    let (sd, sh) = data.scores(v.omega.view());
    let c = v.cutoff;
    let se = sd.iter().filter(|&&s| s > c).count() as f64 / sd.len() as f64;
    let sp = sh.iter().filter(|&&s| s <= c).count() as f64 / sh.len() as f64;
    EvalMetrics {
        weighted_youden: weighted_youden(se, sp, pi),
        sensitivity: se,
        specificity: sp,
        detection_rate: None,
        shrinkage_accuracy: None,
        nonzero_count: v.nonzero_count(),
    }
}

/// Candidate cutoffs for a score sample: one below the minimum, midpoints
/// between consecutive distinct pooled values, one above the maximum.
pub fn cutoff_candidates(scores_diseased: &[f64], scores_healthy: &[f64]) -> Vec<f64> {
    let mut pooled: Vec<f64> = scores_diseased.iter().chain(scores_healthy).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();
    let mut out = Vec::with_capacity(pooled.len() + 1);
    out.push(pooled[0] - 1.0);
    out.extend(pooled.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(pooled[pooled.len() - 1] + 1.0);
    out
}

/// Cutoff maximizing the empirical weighted Youden index for fixed scores.
///
/// Ties go to the smallest cutoff. Runs in `O(n log n)`.
///
/// # Panics
/// If either score list is empty or contains NaN.
pub fn best_cutoff_scan(scores_diseased: &[f64], scores_healthy: &[f64], pi: f64) -> (f64, f64) {
    assert!(
        !scores_diseased.is_empty() && !scores_healthy.is_empty(),
        "cutoff scan needs scores from both groups"
    );
    assert!(
        scores_diseased.iter().chain(scores_healthy).all(|s| !s.is_nan()),
        "cutoff scan got NaN scores"
    );
    let mut d = scores_diseased.to_vec();
    let mut h = scores_healthy.to_vec();
    d.sort_by(f64::total_cmp);
    h.sort_by(f64::total_cmp);
    let (n1, n0) = (d.len() as f64, h.len() as f64);

    let (mut id, mut ih) = (0usize, 0usize);
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for c in cutoff_candidates(&d, &h) {
        // Advance past every score ≤ c.
        while id < d.len() && d[id] <= c {
            id += 1;
        }
        while ih < h.len() && h[ih] <= c {
            ih += 1;
        }
        let se = (d.len() - id) as f64 / n1;
        let sp = ih as f64 / n0;
        let j = weighted_youden(se, sp, pi);
        if j > best.1 {
            best = (c, j);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ds(d: Array2<f64>, h: Array2<f64>) -> BiomarkerDataset {
        BiomarkerDataset::new(d, h, None).unwrap()
    }

    fn random_instance(p: usize, n: usize, seed: u64) -> (BiomarkerDataset, RulePoint) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.5));
        let h = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.5..1.0));
        let omega = Array1::from_shape_fn(p, |_| rng.random_range(-1.0..1.0)) / (p as f64).sqrt();
        (ds(d, h), RulePoint::new(omega, rng.random_range(-0.3..0.3)))
    }

    #[test]
    fn zero_rule_with_equal_weights_gives_zero() {
        let (data, _) = random_instance(3, 7, 1);
        let ctx = ObjectiveContext::new(&data, 0.5, 0.4).unwrap();
        for c in [-2.0, 0.0, 0.7] {
            assert_eq!(smooth_f(&RulePoint::new(Array1::zeros(3), c), &ctx), 0.0);
        }
    }

    #[test]
    fn saturated_separation() {
        let data = ds(array![[10.0]], array![[-10.0]]);
        let ctx = ObjectiveContext::new(&data, 0.5, 0.1).unwrap();
        let v = RulePoint::new(array![1.0], 0.0);
        assert!((smooth_f(&v, &ctx) + 0.5).abs() <= 1e-12);
        let g = smooth_grad(&v, &ctx);
        assert!(g.iter().all(|x| x.abs() <= 1e-100), "{g}");
    }

    #[test]
    fn single_pair_matches_reference_cdf() {
        // 0.5·Φ(−0.5) − 0.5·Φ(0.5) from a 40-digit evaluation.
        let data = ds(array![[1.0]], array![[0.0]]);
        let ctx = ObjectiveContext::new(&data, 0.5, 1.0).unwrap();
        let v = RulePoint::new(array![1.0], 0.5);
        assert!((smooth_f(&v, &ctx) - (-0.191_462_461_274_013_1)).abs() <= 1e-15);
    }

    #[test]
    fn identical_groups_cancel_gradient() {
        let (data, v) = random_instance(4, 9, 3);
        let same = ds(data.diseased().to_owned(), data.diseased().to_owned());
        let ctx = ObjectiveContext::new(&same, 0.5, 0.3).unwrap();
        let g = smooth_grad(&v, &ctx);
        assert!(g.iter().all(|x| x.abs() < 1e-15), "{g}");
    }

    /// Central differences with step 1e-5, compared entrywise relative to the
    /// gradient's scale.
    pub(crate) fn finite_difference(v: &RulePoint, ctx: &ObjectiveContext<'_>) -> Array1<f64> {
        let x = v.to_vector();
        let step = 1e-5;
        Array1::from_shape_fn(x.len(), |k| {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[k] += step;
            minus[k] -= step;
            (ctx.value_at(plus.view()) - ctx.value_at(minus.view())) / (2.0 * step)
        })
    }

    #[test]
    fn gradient_matches_finite_differences_on_fixed_instance() {
        let (data, v) = random_instance(5, 20, 42);
        let ctx = ObjectiveContext::new(&data, 0.5, 0.5).unwrap();
        let g = smooth_grad(&v, &ctx);
        let fd = finite_difference(&v, &ctx);
        let rel = (&g - &fd).mapv(f64::abs).sum() / g.mapv(f64::abs).sum();
        assert!(rel <= 1e-6, "relative error {rel}");
    }

    #[test]
    fn empirical_counts() {
        // Perfect separation.
        let data = ds(array![[2.0], [3.0]], array![[0.0], [1.0]]);
        let m = empirical_weighted_youden(&RulePoint::new(array![1.0], 1.5), &data, 0.3);
        assert_eq!((m.sensitivity, m.specificity, m.weighted_youden), (1.0, 1.0, 1.0));
        // Everything called positive.
        let m = empirical_weighted_youden(&RulePoint::new(array![1.0], -5.0), &data, 0.6);
        assert_eq!((m.sensitivity, m.specificity), (1.0, 0.0));
        assert!((m.weighted_youden - 0.2).abs() < 1e-15);
        let data = ds(array![[1.0], [3.0]], array![[0.0], [2.0]]);
        let m = empirical_weighted_youden(&RulePoint::new(array![1.0], 0.5), &data, 0.5);
        assert_eq!((m.sensitivity, m.specificity, m.weighted_youden), (1.0, 0.5, 0.5));
    }

    #[test]
    fn specificity_counts_ties_as_negative() {
        let data = ds(array![[1.0]], array![[1.0]]);
        let m = empirical_weighted_youden(&RulePoint::new(array![1.0], 1.0), &data, 0.5);
        assert_eq!((m.sensitivity, m.specificity), (0.0, 1.0));
    }

    /// Brute force over every candidate cutoff, independent of the sweep.
    fn brute_force_scan(d: &[f64], h: &[f64], pi: f64) -> (f64, f64) {
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for c in cutoff_candidates(d, h) {
            let se = d.iter().filter(|&&s| s > c).count() as f64 / d.len() as f64;
            let sp = h.iter().filter(|&&s| s <= c).count() as f64 / h.len() as f64;
            let j = weighted_youden(se, sp, pi);
            if j > best.1 {
                best = (c, j);
            }
        }
        best
    }

    #[test]
    fn cutoff_scan_examples() {
        assert_eq!(best_cutoff_scan(&[2.0, 3.0], &[0.0, 1.0], 0.5), (1.5, 1.0));
        assert_eq!(best_cutoff_scan(&[1.0, 2.0, 3.0], &[0.0], 0.5), (0.5, 1.0));
        let (_, j) = best_cutoff_scan(&[0.0, 2.0], &[1.0, 3.0], 0.5);
        assert_eq!(j, brute_force_scan(&[0.0, 2.0], &[1.0, 3.0], 0.5).1);
        assert_eq!(j, 0.0);
    }

    proptest! {
        #[test]
        fn value_stays_in_range(seed in any::<u64>(), pi in 0.01f64..0.99, h in 0.01f64..5.0) {
            let (data, v) = random_instance(3, 6, seed);
            let ctx = ObjectiveContext::new(&data, pi, h).unwrap();
            let f = smooth_f(&v, &ctx);
            prop_assert!(f >= -(1.0 - pi) && f <= pi);
        }

        #[test]
        fn small_bandwidth_recovers_counts(seed in any::<u64>(), pi in 0.05f64..0.95) {
            let (data, v) = random_instance(2, 5, seed);
            let (sd, sh) = data.scores(v.omega.view());
            // Generic position: keep every score away from the cutoff.
            prop_assume!(sd.iter().chain(sh.iter()).all(|s| (s - v.cutoff).abs() > 1e-4));
            let ctx = ObjectiveContext::new(&data, pi, 1e-6).unwrap();
            let m = empirical_weighted_youden(&v, &data, pi);
            let limit = pi * (1.0 - m.sensitivity) - (1.0 - pi) * m.specificity;
            prop_assert!((smooth_f(&v, &ctx) - limit).abs() <= 1e-8);
            prop_assert!((smoothed_weighted_youden(&v, &ctx) - m.weighted_youden).abs() <= 2e-8);
        }

        #[test]
        fn scan_matches_brute_force(
            d in proptest::collection::vec(-5i32..5, 1..12),
            h in proptest::collection::vec(-5i32..5, 1..12),
            pi in 0.05f64..0.95,
        ) {
            let d: Vec<f64> = d.into_iter().map(f64::from).collect();
            let h: Vec<f64> = h.into_iter().map(f64::from).collect();
            prop_assert_eq!(best_cutoff_scan(&d, &h, pi), brute_force_scan(&d, &h, pi));
        }

        #[test]
        fn rescaling_leaves_empirical_index_unchanged(seed in any::<u64>(), s in prop::sample::select(vec![0.5, 2.0, 10.0])) {
            let (data, v) = random_instance(4, 8, seed);
            let scaled = RulePoint::new(&v.omega * s, v.cutoff * s);
            prop_assert_eq!(
                empirical_weighted_youden(&v, &data, 0.5),
                empirical_weighted_youden(&scaled, &data, 0.5)
            );
        }
    }
}
