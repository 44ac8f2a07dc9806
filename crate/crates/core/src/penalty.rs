//! SCAD penalty, the proximal map of `g(ω, c) = Σₜ p_λ(|ωₜ|) + λ₂c²`, and the
//! gradient mapping used both by the line search and as a stationarity measure.

use ndarray::{Array1, ArrayView1, Zip};

use crate::data::{HyperParams, RulePoint};
use crate::objective::ObjectiveContext;
use crate::solver::ProxTerm;

/// Penalty level and shape of a SCAD penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScadParams {
    pub lambda: f64,
    pub a: f64,
}

impl ScadParams {
    /// # Panics
    /// Unless `lambda ≥ 0` and `a > 2`.
    pub fn new(lambda: f64, a: f64) -> Self {
        assert!(lambda >= 0.0, "SCAD penalty level must be nonnegative, got {lambda}");
        assert!(a > 2.0, "SCAD shape must exceed 2, got {a}");
        Self { lambda, a }
    }
}

/// SCAD penalty `p_λ(x)` for `x ≥ 0`: linear up to λ, quadratic blend up to
/// aλ, then constant at λ²(a+1)/2.
///
/// # Panics
/// If `x < 0`; callers pass magnitudes.
pub fn scad_value(x: f64, params: ScadParams) -> f64 {
    assert!(x >= 0.0, "scad_value expects a magnitude, got {x}");
    let ScadParams { lambda, a } = params;
    if x <= lambda {
        lambda * x
    } else if x <= a * lambda {
        (2.0 * a * lambda * x - x * x - lambda * lambda) / (2.0 * (a - 1.0))
    } else {
        lambda * lambda * (a + 1.0) / 2.0
    }
}

/// Derivative `p′_λ(x)` for `x ≥ 0`, with the convention `p′_λ(0) = 0`.
pub fn scad_derivative(x: f64, params: ScadParams) -> f64 {
    assert!(x >= 0.0, "scad_derivative expects a magnitude, got {x}");
    let ScadParams { lambda, a } = params;
    if x == 0.0 {
        0.0
    } else if x <= lambda {
        lambda
    } else {
        (a * lambda - x).max(0.0) / (a - 1.0)
    }
}

pub(crate) fn prox_objective(z: f64, x: f64, step: f64, params: ScadParams) -> f64 {
    (z - x) * (z - x) / (2.0 * step) + scad_value(z.abs(), params)
}

/// `argmin_z (z − x)²/(2·step) + p_λ(|z|)`.
///
/// Closed form while the subproblem is convex (`step < a − 1`); otherwise the
/// minimizer is picked among the per-piece candidates, ties going to the
/// smaller magnitude.
///
/// # Panics
/// If `step ≤ 0`.
pub fn scad_prox(x: f64, step: f64, params: ScadParams) -> f64 {
    assert!(step > 0.0, "prox step must be positive, got {step}");
    let ScadParams { lambda, a } = params;
    if lambda == 0.0 || x == 0.0 {
        return x;
    }
    let sign = x.signum();
    let ax = x.abs();
    if step < a - 1.0 {
        let z = if ax <= lambda * (1.0 + step) {
            (ax - step * lambda).max(0.0)
        } else if ax <= a * lambda {
            ((a - 1.0) * ax - a * step * lambda) / (a - 1.0 - step)
        } else {
            ax
        };
        return sign * z;
    }

    // Nonconvex subproblem. On [λ, aλ] the objective is concave, so only its
    // endpoints can be minimizers there.
    let candidates = [
        (ax - step * lambda).clamp(0.0, lambda),
        lambda.min(ax),
        (a * lambda).min(ax),
        ax.max(a * lambda),
    ];
    let mut best = (0.0, prox_objective(0.0, ax, step, params));
    for z in candidates {
        let val = prox_objective(z, ax, step, params);
        if val < best.1 || (val == best.1 && z < best.0) {
            best = (z, val);
        }
    }
    sign * best.0
}

/// Soft thresholding `sign(x)·max(|x| − t, 0)`.
pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    x.signum() * (x.abs() - threshold).max(0.0)
}

/// The composite penalty `g(ω, c) = Σₜ p_{λ₁}(|ωₜ|) + λ₂c²` on stacked points.
#[derive(Debug, Clone, Copy)]
pub struct ScadRidgePenalty {
    pub scad: ScadParams,
    pub lambda2: f64,
}

impl ScadRidgePenalty {
    pub fn from_hyper(hyper: &HyperParams) -> Self {
        Self {
            scad: ScadParams::new(hyper.lambda1, hyper.scad_a),
            lambda2: hyper.lambda2,
        }
    }
}

impl ProxTerm for ScadRidgePenalty {
    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        let p = x.len() - 1;
        let pen: f64 = x.iter().take(p).map(|w| scad_value(w.abs(), self.scad)).sum();
        pen + self.lambda2 * x[p] * x[p]
    }

    fn prox(&self, x: ArrayView1<'_, f64>, step: f64) -> Array1<f64> {
        let p = x.len() - 1;
        let mut out = Array1::zeros(x.len());
        for t in 0..p {
            out[t] = scad_prox(x[t], step, self.scad);
        }
        out[p] = x[p] / (1.0 + 2.0 * step * self.lambda2);
        out
    }
}

/// Proximal map of `step·g` applied to a rule.
pub fn prox_g(v: &RulePoint, step: f64, hyper: &HyperParams) -> RulePoint {
    let out = ScadRidgePenalty::from_hyper(hyper).prox(v.to_vector().view(), step);
    RulePoint::from_vector(out.view())
}

/// Generic gradient mapping `(x − prox_{t·g}(x − t·grad)) / t`.
pub fn gradient_mapping_from<P: ProxTerm + ?Sized>(
    x: ArrayView1<'_, f64>,
    grad: ArrayView1<'_, f64>,
    t: f64,
    penalty: &P,
) -> Array1<f64> {
    let trial = Zip::from(&x).and(&grad).map_collect(|&xi, &gi| xi - t * gi);
    let moved = penalty.prox(trial.view(), t);
    (&x - &moved) / t
}

/// Gradient mapping `G_t(v) = (v − prox_{t·g}(v − t∇f(v))) / t`.
pub fn gradient_mapping(
    v: &RulePoint,
    tilde_t: f64,
    ctx: &ObjectiveContext<'_>,
    hyper: &HyperParams,
) -> Array1<f64> {
    assert!(tilde_t > 0.0, "gradient mapping scale must be positive");
    let x = v.to_vector();
    let grad = ctx.gradient_at(x.view());
    gradient_mapping_from(x.view(), grad.view(), tilde_t, &ScadRidgePenalty::from_hyper(hyper))
}

/// `‖v − prox_g(v − ∇f(v))‖`, the unit-scale gradient mapping norm.
pub fn stationarity_residual(v: &RulePoint, ctx: &ObjectiveContext<'_>, hyper: &HyperParams) -> f64 {
    let g = gradient_mapping(v, 1.0, ctx, hyper);
    g.dot(&g).sqrt()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::data::BiomarkerDataset;
    use crate::objective::smooth_grad;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    const P1: ScadParams = ScadParams { lambda: 1.0, a: 3.7 };

    /// Trapezoid integral of the derivative on a fine grid.
    fn integrate_derivative(x: f64, params: ScadParams) -> f64 {
        let n = 200_000;
        let h = x / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let (l, r) = (k as f64 * h, (k + 1) as f64 * h);
            // p′(0) = 0 is a convention; the integrand's right limit at 0 is λ.
            let fl = if k == 0 { params.lambda } else { scad_derivative(l, params) };
            acc += 0.5 * h * (fl + scad_derivative(r, params));
        }
        acc
    }

    #[test]
    fn value_examples() {
        assert_eq!(scad_value(0.0, P1), 0.0);
        assert!((scad_value(1.0, P1) - 1.0).abs() < 1e-15);
        assert!((scad_value(10.0, P1) - 2.35).abs() < 1e-15);
        for x in [1.0, 2.0, 3.0, 10.0] {
            assert!((integrate_derivative(x, P1) - scad_value(x, P1)).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(scad_derivative(0.0, P1), 0.0);
        assert_eq!(scad_derivative(0.5, P1), 1.0);
        let d = scad_derivative(2.0, P1);
        assert!((d - 1.7 / 2.7).abs() < 1e-15);
        let fd = (scad_value(2.0 + 1e-6, P1) - scad_value(2.0 - 1e-6, P1)) / 2e-6;
        assert!((d - fd).abs() < 1e-8);
        assert!((d - 0.62963).abs() < 1e-5);
    }

    #[test]
    #[should_panic]
    fn negative_magnitude_panics() {
        scad_value(-1.0, P1);
    }

    #[test]
    #[should_panic]
    fn nonpositive_step_panics() {
        scad_prox(1.0, 0.0, P1);
    }

    /// Grid minimizer of the prox objective over [−6, 6] at 1e-6 resolution.
    ///
    /// A 1e-3 grid locates every local minimum; each is then refined on a
    /// 1e-6 grid over its neighbourhood, and the best refined point wins.
    pub(crate) fn grid_prox(x: f64, step: f64, params: ScadParams) -> f64 {
        let obj = |z: f64| prox_objective(z, x, step, params);
        let coarse: f64 = 1e-3;
        let n = (12.0 / coarse).round() as i64;
        let vals: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let z = -6.0 + k as f64 * coarse;
                (z, obj(z))
            })
            .collect();
        let mut best = (f64::NAN, f64::INFINITY);
        for k in 0..vals.len() {
            let left = if k == 0 { f64::INFINITY } else { vals[k - 1].1 };
            let right = if k + 1 == vals.len() { f64::INFINITY } else { vals[k + 1].1 };
            if vals[k].1 <= left && vals[k].1 <= right {
                let centre = vals[k].0;
                for m in -1000..=1000 {
                    let z = centre + m as f64 * 1e-6;
                    let v = obj(z);
                    if v < best.1 {
                        best = (z, v);
                    }
                }
            }
        }
        best.0
    }

    #[test]
    fn prox_examples() {
        assert_eq!(scad_prox(0.5, 1.0, P1), 0.0);
        assert_eq!(scad_prox(10.0, 1.0, P1), 10.0);
        let z = scad_prox(3.0, 1.0, P1);
        assert!((z - (2.7 * 3.0 - 3.7) / 1.7).abs() < 1e-15);
        assert!((z - 2.58824).abs() < 1e-5);
        assert!((z - grid_prox(3.0, 1.0, P1)).abs() < 1e-5);
    }

    #[test]
    fn prox_large_step_uses_candidates() {
        // step = 4 ≥ a − 1: the subproblem is nonconvex.
        for x in [0.5, 2.0, 2.9, 3.0, 3.5, 4.0, 5.5] {
            let z = scad_prox(x, 4.0, P1);
            assert!((z - grid_prox(x, 4.0, P1)).abs() < 1e-5, "x = {x}: {z}");
        }
    }

    #[test]
    fn prox_g_examples() {
        let hyper = HyperParams { pi: 0.5, bandwidth: 1.0, lambda1: 0.0, lambda2: 0.0, scad_a: 3.7 };
        let v = RulePoint::new(array![0.3, -2.0], 1.5);
        assert_eq!(prox_g(&v, 0.7, &hyper), v);

        let hyper = HyperParams { lambda2: 1e-6, ..hyper };
        let out = prox_g(&RulePoint::new(array![0.0], 1.0), 1.0, &hyper);
        assert_eq!(out.cutoff, 1.0 / (1.0 + 2e-6));

        let hyper = HyperParams { lambda1: 1.0, lambda2: 0.0, ..hyper };
        let out = prox_g(&RulePoint::new(array![0.5, 3.0, 10.0], 0.2), 1.0, &hyper);
        for (got, x) in out.omega.iter().zip([0.5, 3.0]) {
            assert!((got - grid_prox(x, 1.0, P1)).abs() < 1e-5);
        }
        assert_eq!(out.omega[0], 0.0);
        assert!((out.omega[1] - 2.588_235).abs() < 1e-6);
        assert_eq!(out.omega[2], 10.0);
        assert_eq!(out.cutoff, 0.2);
    }

    fn small_problem() -> BiomarkerDataset {
        let d = Array2::from_shape_vec((3, 2), vec![1.0, 0.5, 0.2, 1.1, 0.8, -0.3]).unwrap();
        let h = Array2::from_shape_vec((3, 2), vec![-0.4, 0.1, 0.3, -0.9, -1.0, 0.2]).unwrap();
        BiomarkerDataset::new(d, h, None).unwrap()
    }

    #[test]
    fn gradient_mapping_without_penalty_is_the_gradient() {
        let data = small_problem();
        let ctx = ObjectiveContext::new(&data, 0.4, 0.6).unwrap();
        let hyper = HyperParams { pi: 0.4, bandwidth: 0.6, lambda1: 0.0, lambda2: 0.0, scad_a: 3.7 };
        let v = RulePoint::new(array![0.6, -0.2], 0.1);
        let g = smooth_grad(&v, &ctx);
        for t in [0.25, 1.0, 8.0] {
            let m = gradient_mapping(&v, t, &ctx, &hyper);
            assert!((&m - &g).iter().all(|d| d.abs() < 1e-15));
        }
    }

    #[test]
    fn gradient_mapping_matches_hand_composition() {
        let data = small_problem();
        let ctx = ObjectiveContext::new(&data, 0.5, 0.5).unwrap();
        let hyper = HyperParams { pi: 0.5, bandwidth: 0.5, lambda1: 0.3, lambda2: 0.01, scad_a: 3.7 };
        let v = RulePoint::new(array![0.9, 0.05], -0.2);
        let g = smooth_grad(&v, &ctx);
        let scad = ScadParams::new(0.3, 3.7);
        let moved = [
            scad_prox(v.omega[0] - g[0], 1.0, scad),
            scad_prox(v.omega[1] - g[1], 1.0, scad),
            (v.cutoff - g[2]) / 1.02,
        ];
        let expect = array![v.omega[0] - moved[0], v.omega[1] - moved[1], v.cutoff - moved[2]];
        let m = gradient_mapping(&v, 1.0, &ctx, &hyper);
        assert!((&m - &expect).iter().all(|d| d.abs() < 1e-15), "{m} vs {expect}");
        assert_eq!(stationarity_residual(&v, &ctx, &hyper), m.dot(&m).sqrt());
    }

    #[test]
    fn fixed_point_has_zero_mapping() {
        // ω = 0 with π = 0.5 makes ∂f/∂c vanish; a large λ₁ keeps ω in the
        // dead zone, so the prox-gradient step leaves the point unchanged.
        let data = small_problem();
        let ctx = ObjectiveContext::new(&data, 0.5, 0.5).unwrap();
        let hyper = HyperParams { pi: 0.5, bandwidth: 0.5, lambda1: 50.0, lambda2: 0.0, scad_a: 3.7 };
        let v = RulePoint::new(array![0.0, 0.0], 0.3);
        let m = gradient_mapping(&v, 1.0, &ctx, &hyper);
        assert!(m.iter().all(|x| *x == 0.0), "{m}");
        assert_eq!(stationarity_residual(&v, &ctx, &hyper), 0.0);
    }

    proptest! {
        #[test]
        fn value_is_continuous_at_knots(lambda in 0.01f64..5.0, a in 2.01f64..8.0) {
            let params = ScadParams::new(lambda, a);
            for knot in [lambda, a * lambda] {
                let below = scad_value(knot * (1.0 - 1e-15), params);
                let above = scad_value(knot * (1.0 + 1e-15), params);
                prop_assert!((below - above).abs() <= 1e-12);
            }
        }

        #[test]
        fn derivative_matches_finite_difference(lambda in 0.1f64..3.0, a in 2.1f64..6.0, u in 0.0f64..1.0) {
            let params = ScadParams::new(lambda, a);
            let x = u * (a + 1.0) * lambda;
            prop_assume!((x - lambda).abs() > 1e-4 && (x - a * lambda).abs() > 1e-4 && x > 1e-4);
            let fd = (scad_value(x + 1e-7, params) - scad_value(x - 1e-7, params)) / 2e-7;
            prop_assert!((fd - scad_derivative(x, params)).abs() < 1e-6);
        }

        #[test]
        fn prox_is_odd_and_shrinks(x in -20.0f64..20.0, step in 0.01f64..10.0, lambda in 0.0f64..3.0, a in 2.05f64..6.0) {
            let params = ScadParams::new(lambda, a);
            let z = scad_prox(x, step, params);
            prop_assert_eq!(scad_prox(-x, step, params), -z);
            prop_assert!(z.abs() <= x.abs());
        }

        #[test]
        fn zero_penalty_prox_is_identity(w in -5.0f64..5.0, c in -5.0f64..5.0, step in 0.01f64..5.0) {
            let hyper = HyperParams { pi: 0.5, bandwidth: 1.0, lambda1: 0.0, lambda2: 0.0, scad_a: 3.7 };
            let v = RulePoint::new(array![w, -w], c);
            prop_assert_eq!(prox_g(&v, step, &hyper), v);
        }
    }
}
