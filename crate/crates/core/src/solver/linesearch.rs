//! Barzilai–Borwein initial steps and the interpolation backtracking search.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use super::eval::{dist_sq, Evaluator, Point};
use super::{ProxTerm, SmoothTerm, SolverConfig};
use crate::data::{HyperParams, RulePoint};
use crate::objective::ObjectiveContext;
use crate::penalty::ScadRidgePenalty;

/// Alternating Barzilai–Borwein step from displacement `s` and gradient
/// change `r`: `sᵀs/|sᵀr|` on odd iterations, `|sᵀr|/rᵀr` on even ones.
///
/// A zero denominator yields `alpha_min`; the result is clamped to
/// `[alpha_min, alpha_max]`.
pub fn bb_step(s: ArrayView1<'_, f64>, r: ArrayView1<'_, f64>, iteration_parity: usize, config: &SolverConfig) -> f64 {
    assert_eq!(s.len(), r.len(), "BB vectors must have equal length");
    let sr = s.dot(&r).abs();
    let (num, den) = if iteration_parity % 2 == 1 {
        (s.dot(&s).abs(), sr)
    } else {
        (sr, r.dot(&r).abs())
    };
    if den == 0.0 || !den.is_finite() {
        return config.alpha_min;
    }
    let alpha = num / den;
    if alpha.is_nan() {
        return config.alpha_min;
    }
    alpha.clamp(config.alpha_min, config.alpha_max)
}

/// Minimizer of the quadratic through `h(0)`, `h′(0)` and `h(α₁)`.
pub fn quadratic_step(h0: f64, dh0: f64, alpha1: f64, h1: f64) -> f64 {
    -dh0 * alpha1 * alpha1 / (2.0 * (h1 - h0 - dh0 * alpha1))
}

/// Minimizer of the cubic through `h(0)`, `h′(0)`, `h(α₁)` and `h(α₂)`,
/// where `α₁` is the latest trial.
///
/// Falls back to the quadratic limit when the cubic coefficient vanishes and
/// returns NaN when the model has no local minimizer.
pub fn cubic_step(h0: f64, dh0: f64, alpha1: f64, h1: f64, alpha2: f64, h2: f64) -> f64 {
    let r1 = h1 - h0 - dh0 * alpha1;
    let r2 = h2 - h0 - dh0 * alpha2;
    let (a1s, a2s) = (alpha1 * alpha1, alpha2 * alpha2);
    let d = alpha1 - alpha2;
    let a = (r1 / a1s - r2 / a2s) / d;
    let b = (-alpha2 * r1 / a1s + alpha1 * r2 / a2s) / d;
    if a == 0.0 {
        return -dh0 / (2.0 * b);
    }
    let disc = b * b - 3.0 * a * dh0;
    if disc < 0.0 {
        return f64::NAN;
    }
    // Two algebraically equal forms; pick the one without cancellation.
    if b > 0.0 {
        -dh0 / (b + disc.sqrt())
    } else {
        (-b + disc.sqrt()) / (3.0 * a)
    }
}

/// How a failed trial step is reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backtrack {
    /// Quadratic, then cubic interpolation, safeguarded into `[τ₁α, τ₂α]`.
    Polynomial,
    /// `α ← α/2`.
    Halving,
}

/// One step reduction: the model's proposal and the safeguarded result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepProposal {
    pub from: f64,
    pub model: f64,
    pub to: f64,
}

/// What an acceptance predicate sees for one trial step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchTrial {
    pub alpha: f64,
    pub f_candidate: f64,
    pub f_anchor: f64,
    /// `‖G_α(anchor)‖²`.
    pub mapping_norm_sq: f64,
    /// `‖candidate − anchor‖²`.
    pub dist_sq: f64,
}

/// `h(α) ≤ h(0) − c₁·α·‖G_α‖²`.
pub fn sufficient_decrease(c1: f64) -> impl Fn(&LineSearchTrial) -> bool {
    move |t| t.f_candidate <= t.f_anchor - c1 * t.alpha * t.mapping_norm_sq
}

pub(crate) struct Search<C> {
    pub alpha: f64,
    pub point: Point<C>,
    pub accepted: bool,
    pub f_evals: usize,
    pub proposals: Vec<StepProposal>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn search<S, P>(
    ev: &Evaluator<'_, S, P>,
    anchor: ArrayView1<'_, f64>,
    anchor_grad: ArrayView1<'_, f64>,
    f_anchor: f64,
    alpha0: f64,
    accept: impl Fn(&LineSearchTrial) -> bool,
    backtrack: Backtrack,
    config: &SolverConfig,
) -> Search<S::Cache>
where
    S: SmoothTerm,
    P: ProxTerm + ?Sized,
{
    assert!(f_anchor.is_finite(), "line search anchor must have a finite objective");
    assert!(alpha0 > 0.0, "initial step must be positive");
    let mut alpha = alpha0;
    let mut previous: Option<(f64, f64)> = None;
    let mut best: Option<(f64, Point<S::Cache>)> = None;
    let mut proposals = Vec::new();

    for i in 0..config.max_ls_iter {
        let x = ev.prox_step(anchor, anchor_grad, alpha);
        let d2 = dist_sq(x.view(), anchor);
        let point = ev.eval(x);
        let trial = LineSearchTrial {
            alpha,
            f_candidate: point.f,
            f_anchor,
            mapping_norm_sq: d2 / (alpha * alpha),
            dist_sq: d2,
        };
        let finite = point.f.is_finite();
        if finite && accept(&trial) {
            return Search { alpha, point, accepted: true, f_evals: i + 1, proposals };
        }
        if finite && best.as_ref().map_or(true, |(_, b)| point.f < b.f) {
            best = Some((alpha, point));
        }
        if i + 1 == config.max_ls_iter {
            break;
        }

        let next = match backtrack {
            Backtrack::Halving => {
                let to = 0.5 * alpha;
                proposals.push(StepProposal { from: alpha, model: to, to });
                to
            }
            Backtrack::Polynomial => {
                let model = if !finite {
                    config.tau1 * alpha
                } else {
                    // h′(0) ≈ −‖G_α‖²: h decreases along −G.
                    let dh0 = -trial.mapping_norm_sq;
                    let raw = match previous {
                        Some((a2, h2)) => cubic_step(f_anchor, dh0, alpha, trial.f_candidate, a2, h2),
                        None => quadratic_step(f_anchor, dh0, alpha, trial.f_candidate),
                    };
                    if raw.is_finite() {
                        raw
                    } else {
                        0.5 * alpha
                    }
                };
                let to = model.max(config.tau1 * alpha).min(config.tau2 * alpha);
                proposals.push(StepProposal { from: alpha, model, to });
                to
            }
        };
        previous = finite.then_some((alpha, trial.f_candidate));
        alpha = next;
    }

    let f_evals = config.max_ls_iter;
    match best {
        Some((alpha, point)) => Search { alpha, point, accepted: false, f_evals, proposals },
        // Every trial was non-finite: stay at the anchor.
        None => {
            let point = ev.eval(anchor.to_owned());
            Search { alpha: 0.0, point, accepted: false, f_evals: f_evals + 1, proposals }
        }
    }
}

/// Result of a standalone line search on the penalized Youden objective.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub point: RulePoint,
    pub f_value: f64,
    pub f_evals: usize,
    /// False if the trial budget ran out and `point` is merely the best seen.
    pub accepted: bool,
    pub proposals: Vec<StepProposal>,
}

/// Interpolation backtracking from `anchor` along the proximal-gradient path
/// `α ↦ prox_{αg}(anchor − α∇f(anchor))`, starting at `alpha0` and stopping at
/// the first trial that `accept` admits.
pub fn poly_linesearch(
    anchor: &RulePoint,
    alpha0: f64,
    accept: impl Fn(&LineSearchTrial) -> bool,
    ctx: &ObjectiveContext<'_>,
    hyper: &HyperParams,
    config: &SolverConfig,
) -> LineSearchOutcome {
    let penalty = ScadRidgePenalty::from_hyper(hyper);
    let ev = Evaluator::new(ctx, &penalty);
    let mut start = ev.eval(anchor.to_vector());
    let grad: Array1<f64> = ev.grad(&mut start).clone();
    let s = search(&ev, start.x.view(), grad.view(), start.f, alpha0, accept, Backtrack::Polynomial, config);
    LineSearchOutcome {
        alpha: s.alpha,
        point: RulePoint::from_vector(s.point.x.view()),
        f_value: s.point.f,
        f_evals: s.f_evals,
        accepted: s.accepted,
        proposals: s.proposals,
    }
}
