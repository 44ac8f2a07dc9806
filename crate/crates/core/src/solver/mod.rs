//! Nonmonotone accelerated proximal gradient solvers for `min F = f + g`.
//!
//! Three variants share one trace format:
//!
//! * [`Variant::NapgPoly`]: nonmonotone APG whose step sizes start from
//!   alternating Barzilai–Borwein estimates and are refined by quadratic and
//!   cubic interpolation of `h(α) = F(prox_{αg}(v − α∇f(v)))`.
//! * [`Variant::NapgBacktracking`]: the same outer iteration with plain step
//!   halving in place of interpolation.
//! * [`Variant::Papg`]: monotone fixed-step APG with function-value restarts.
//!
//! The solvers are generic over a [`SmoothTerm`] and a [`ProxTerm`]; the
//! Youden objective, the logistic baseline and the test problems all plug in
//! through those two traits.

mod config;
mod eval;
mod linesearch;
mod napg;
mod papg;
mod trace;

use ndarray::{Array1, ArrayView1};

pub use config::{SolverConfig, Variant};
pub use linesearch::{
    bb_step, cubic_step, poly_linesearch, quadratic_step, sufficient_decrease, Backtrack,
    LineSearchOutcome, LineSearchTrial, StepProposal,
};
pub use napg::{NapgSolver, SolverState};
pub use trace::{AcceptTest, AcceptanceCheck, Branch, IterationRecord, SolverTrace, Termination};

pub(crate) use eval::Evaluator;

use crate::data::{HyperParams, RulePoint};
use crate::objective::ObjectiveContext;
use crate::penalty::ScadRidgePenalty;

/// Differentiable part `f` of the composite objective.
///
/// `value` may return a cache of intermediate quantities that `gradient`
/// reuses at the same point.
pub trait SmoothTerm {
    type Cache: Clone;

    fn dim(&self) -> usize;

    fn value(&self, x: ArrayView1<'_, f64>) -> (f64, Self::Cache);

    /// Gradient at `x`, where `cache` came from `value(x)`.
    fn gradient(&self, x: ArrayView1<'_, f64>, cache: &Self::Cache) -> Array1<f64>;
}

/// Nonsmooth part `g` with a computable proximal map.
pub trait ProxTerm {
    fn value(&self, x: ArrayView1<'_, f64>) -> f64;

    /// `argmin_z g(z) + ‖z − x‖²/(2·step)`.
    fn prox(&self, x: ArrayView1<'_, f64>, step: f64) -> Array1<f64>;
}

/// Result of a generic minimization.
#[derive(Debug, Clone)]
pub struct Minimization {
    /// Lowest-objective iterate seen.
    pub x: Array1<f64>,
    pub f_value: f64,
    pub trace: SolverTrace,
    pub termination: Termination,
}

/// Minimize `smooth + penalty` from `x0` with the configured variant.
pub fn minimize<S, P>(smooth: &S, penalty: &P, x0: ArrayView1<'_, f64>, config: &SolverConfig) -> Minimization
where
    S: SmoothTerm,
    P: ProxTerm + ?Sized,
{
    config.validate().expect("invalid solver configuration");
    assert_eq!(x0.len(), smooth.dim(), "initial point has the wrong dimension");
    assert!(x0.iter().all(|x| x.is_finite()), "initial point must be finite");
    let ev = Evaluator::new(smooth, penalty);
    match config.variant {
        Variant::NapgPoly => napg::run(&ev, x0, config, Backtrack::Polynomial),
        Variant::NapgBacktracking => napg::run(&ev, x0, config, Backtrack::Halving),
        Variant::Papg => papg::run(&ev, x0, config),
    }
}

/// Outcome of fitting a decision rule.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub rule: RulePoint,
    pub f_value: f64,
    pub trace: SolverTrace,
    pub termination: Termination,
}

fn solve_variant(
    init: &RulePoint,
    ctx: &ObjectiveContext<'_>,
    hyper: &HyperParams,
    config: &SolverConfig,
    variant: Variant,
) -> SolveResult {
    let penalty = ScadRidgePenalty::from_hyper(hyper);
    let config = SolverConfig { variant, ..config.clone() };
    let out = minimize(ctx, &penalty, init.to_vector().view(), &config);
    SolveResult {
        rule: RulePoint::from_vector(out.x.view()),
        f_value: out.f_value,
        trace: out.trace,
        termination: out.termination,
    }
}

/// Penalized smoothed-Youden fit with the variant named in `config`.
pub fn solve_configured(
    init: &RulePoint,
    ctx: &ObjectiveContext<'_>,
    hyper: &HyperParams,
    config: &SolverConfig,
) -> SolveResult {
    solve_variant(init, ctx, hyper, config, config.variant)
}

/// Nonmonotone APG with interpolation line search.
pub fn solve(init: &RulePoint, ctx: &ObjectiveContext<'_>, hyper: &HyperParams, config: &SolverConfig) -> SolveResult {
    solve_variant(init, ctx, hyper, config, Variant::NapgPoly)
}

/// Nonmonotone APG with step halving.
pub fn solve_backtracking(
    init: &RulePoint,
    ctx: &ObjectiveContext<'_>,
    hyper: &HyperParams,
    config: &SolverConfig,
) -> SolveResult {
    solve_variant(init, ctx, hyper, config, Variant::NapgBacktracking)
}

/// Fixed-step monotone APG.
pub fn solve_papg(init: &RulePoint, ctx: &ObjectiveContext<'_>, hyper: &HyperParams, config: &SolverConfig) -> SolveResult {
    solve_variant(init, ctx, hyper, config, Variant::Papg)
}

#[cfg(test)]
pub(crate) mod testing {
    //! Problems with known minimizers.
    use super::*;

    /// `f(x) = ½ Σ dᵢ (xᵢ − bᵢ)²`.
    pub struct DiagonalQuadratic {
        pub diag: Array1<f64>,
        pub centre: Array1<f64>,
    }

    impl SmoothTerm for DiagonalQuadratic {
        type Cache = ();

        fn dim(&self) -> usize {
            self.diag.len()
        }

        fn value(&self, x: ArrayView1<'_, f64>) -> (f64, ()) {
            let d = &x - &self.centre;
            (0.5 * (&self.diag * &d).dot(&d), ())
        }

        fn gradient(&self, x: ArrayView1<'_, f64>, _: &()) -> Array1<f64> {
            &self.diag * &(&x - &self.centre)
        }
    }

    pub struct Zero;

    impl ProxTerm for Zero {
        fn value(&self, _: ArrayView1<'_, f64>) -> f64 {
            0.0
        }

        fn prox(&self, x: ArrayView1<'_, f64>, _: f64) -> Array1<f64> {
            x.to_owned()
        }
    }
}
