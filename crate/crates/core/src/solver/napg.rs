//! Nonmonotone accelerated proximal gradient iteration.
//!
//! Each iteration extrapolates `w_k` from the last two iterates and the last
//! extrapolated candidate, searches from `w_k` with a BB initial step, and
//! falls back to a second search from `v_k` when the candidate does not
//! improve on the nonmonotone average `c_k`. The average is
//! `c_{k+1} = (η q_k c_k + F(v_{k+1})) / q_{k+1}` with `q_{k+1} = η q_k + 1`,
//! which keeps `F(v_k) ≤ c_k ≤ mean(F(v_1..v_k))`.

use ndarray::{Array1, ArrayView1};

use super::config::STALL_WINDOW;
use super::eval::{dist_sq, Evaluator, Point};
use super::linesearch::{bb_step, search, Backtrack, LineSearchTrial};
use super::trace::{AcceptTest, AcceptanceCheck, Branch, IterationRecord, SolverTrace, Termination};
use super::{Minimization, ProxTerm, SmoothTerm, SolverConfig};

/// Iteration state: current and previous iterates, the last extrapolated
/// candidate, momentum weights and the nonmonotone average.
pub struct SolverState<C> {
    /// Iterations completed; the current iterate is `v_{k+1}` in 1-based terms.
    pub k: usize,
    pub t_curr: f64,
    pub t_prev: f64,
    pub c_avg: f64,
    pub q: f64,
    v_curr: Point<C>,
    v_prev: Array1<f64>,
    u_curr: Array1<f64>,
    w_prev: Point<C>,
}

impl<C: Clone> SolverState<C> {
    fn start<S, P>(ev: &Evaluator<'_, S, P>, x0: ArrayView1<'_, f64>) -> Self
    where
        S: SmoothTerm<Cache = C>,
        P: ProxTerm + ?Sized,
    {
        let v = ev.eval(x0.to_owned());
        let f = v.f;
        Self {
            k: 0,
            t_curr: 1.0,
            t_prev: 0.0,
            c_avg: f,
            q: 1.0,
            v_prev: v.x.clone(),
            u_curr: v.x.clone(),
            w_prev: v.clone(),
            v_curr: v,
        }
    }

    pub fn v_curr(&self) -> ArrayView1<'_, f64> {
        self.v_curr.x.view()
    }

    pub fn v_prev(&self) -> ArrayView1<'_, f64> {
        self.v_prev.view()
    }

    pub fn u_curr(&self) -> ArrayView1<'_, f64> {
        self.u_curr.view()
    }

    pub fn w_prev(&self) -> ArrayView1<'_, f64> {
        self.w_prev.x.view()
    }

    pub fn f_curr(&self) -> f64 {
        self.v_curr.f
    }
}

fn momentum_update(t: f64) -> f64 {
    ((4.0 * t * t + 1.0).sqrt() + 1.0) / 2.0
}

/// `(q_{k+1}, c_{k+1})` for the weighted running average of objective values.
fn average_update(eta: f64, q: f64, c: f64, f_new: f64) -> (f64, f64) {
    let q_next = eta * q + 1.0;
    (q_next, (eta * q * c + f_new) / q_next)
}

/// Initial BB step, or `initial_step` when there is no displacement.
fn initial_alpha(s: &Array1<f64>, r: &Array1<f64>, parity: usize, config: &SolverConfig) -> f64 {
    if s.iter().all(|x| *x == 0.0) {
        config.initial_step
    } else {
        bb_step(s.view(), r.view(), parity, config)
    }
}

/// One iteration. Returns the trace row for the new iterate, with the
/// residual left at NaN for the caller to fill in.
pub(crate) fn napg_iterate<S, P>(
    state: &mut SolverState<S::Cache>,
    ev: &Evaluator<'_, S, P>,
    config: &SolverConfig,
    backtrack: Backtrack,
) -> IterationRecord
where
    S: SmoothTerm,
    P: ProxTerm + ?Sized,
{
    let iteration = state.k + 1;
    let delta = config.delta;
    let c_k = state.c_avg;

    // Extrapolation.
    let beta_u = state.t_prev / state.t_curr;
    let beta_v = (state.t_prev - 1.0) / state.t_curr;
    let v = &state.v_curr.x;
    let w_x = v + &((&state.u_curr - v) * beta_u) + &((v - &state.v_prev) * beta_v);
    let mut w = if w_x == *v {
        ev.grad(&mut state.v_curr);
        state.v_curr.clone()
    } else {
        ev.eval(w_x)
    };
    let grad_w = ev.grad(&mut w).clone();
    let grad_w_prev = ev.grad(&mut state.w_prev).clone();

    let s = &w.x - &state.w_prev.x;
    let r = &grad_w - &grad_w_prev;
    let alpha_y = initial_alpha(&s, &r, iteration, config);

    let f_w = w.f;
    let accept_u =
        |t: &LineSearchTrial| t.f_candidate <= f_w - delta * t.dist_sq || t.f_candidate <= c_k - delta * t.dist_sq;
    let u_search = search(ev, w.x.view(), grad_w.view(), f_w, alpha_y, accept_u, backtrack, config);
    let u_dist = dist_sq(u_search.point.x.view(), w.x.view());
    let u_check = AcceptanceCheck {
        test: AcceptTest::AnchorOrAverage,
        f_candidate: u_search.point.f,
        f_anchor: f_w,
        c_ref: c_k,
        dist_sq: u_dist,
        delta,
        step: u_search.alpha,
        accepted: u_search.accepted,
    };
    let mut proposals = u_search.proposals.clone();

    let (next, branch, step, z_check) = if u_search.point.f <= c_k - delta * u_dist {
        (u_search.point.clone(), Branch::UBranch, u_search.alpha, None)
    } else {
        let grad_v = ev.grad(&mut state.v_curr).clone();
        let s = &state.v_curr.x - &state.w_prev.x;
        let r = &grad_v - &grad_w_prev;
        let alpha_x = initial_alpha(&s, &r, iteration, config);
        let accept_z = |t: &LineSearchTrial| t.f_candidate <= c_k - delta * t.dist_sq;
        let f_v = state.v_curr.f;
        let z_search = search(ev, state.v_curr.x.view(), grad_v.view(), f_v, alpha_x, accept_z, backtrack, config);
        let z_dist = dist_sq(z_search.point.x.view(), state.v_curr.x.view());
        let z_check = AcceptanceCheck {
            test: AcceptTest::Average,
            f_candidate: z_search.point.f,
            f_anchor: f_v,
            c_ref: c_k,
            dist_sq: z_dist,
            delta,
            step: z_search.alpha,
            accepted: z_search.accepted,
        };
        proposals.extend_from_slice(&z_search.proposals);
        let (chosen, branch, step) = if u_search.point.f <= z_search.point.f {
            (u_search.point.clone(), Branch::ZBranchU, u_search.alpha)
        } else {
            (z_search.point, Branch::ZBranchZ, z_search.alpha)
        };
        if chosen.f <= c_k {
            (chosen, branch, step, Some(z_check))
        } else {
            // Only reachable when both searches exhausted their trials.
            (state.v_curr.clone(), Branch::Hold, 0.0, Some(z_check))
        }
    };

    let t_next = momentum_update(state.t_curr);
    let (q_next, c_next) = average_update(config.eta, state.q, c_k, next.f);

    let old_v = std::mem::replace(&mut state.v_curr, next);
    state.v_prev = old_v.x;
    state.u_curr = u_search.point.x;
    state.w_prev = w;
    state.t_prev = state.t_curr;
    state.t_curr = t_next;
    state.q = q_next;
    state.c_avg = c_next;
    state.k = iteration;
    debug_assert!(
        state.v_curr.f <= c_next + 1e-9 * c_next.abs().max(1.0),
        "F(v) = {} exceeds the reference value {c_next}",
        state.v_curr.f
    );

    IterationRecord {
        iter: iteration,
        f_value: state.v_curr.f,
        residual: f64::NAN,
        cum_f_evals: ev.f_evals(),
        cum_grad_evals: ev.grad_evals(),
        step,
        branch,
        c_avg: c_next,
        q: q_next,
        t: t_next,
        u_search: Some(u_check),
        z_search: z_check,
        proposals,
    }
}

/// Step-by-step driver for callers that want to inspect the state between
/// iterations. Residuals are filled in on each returned record.
pub struct NapgSolver<'a, S: SmoothTerm, P: ProxTerm + ?Sized> {
    ev: Evaluator<'a, S, P>,
    state: SolverState<S::Cache>,
    config: SolverConfig,
    backtrack: Backtrack,
}

impl<'a, S: SmoothTerm, P: ProxTerm + ?Sized> NapgSolver<'a, S, P> {
    pub fn new(smooth: &'a S, penalty: &'a P, x0: ArrayView1<'_, f64>, config: SolverConfig, backtrack: Backtrack) -> Self {
        config.validate().expect("invalid solver configuration");
        let ev = Evaluator::new(smooth, penalty);
        let state = SolverState::start(&ev, x0);
        Self { ev, state, config, backtrack }
    }

    pub fn state(&self) -> &SolverState<S::Cache> {
        &self.state
    }

    pub fn iterate(&mut self) -> IterationRecord {
        let mut record = napg_iterate(&mut self.state, &self.ev, &self.config, self.backtrack);
        record.residual = self.ev.residual(&mut self.state.v_curr);
        record
    }
}

pub(crate) fn run<S, P>(
    ev: &Evaluator<'_, S, P>,
    x0: ArrayView1<'_, f64>,
    config: &SolverConfig,
    backtrack: Backtrack,
) -> Minimization
where
    S: SmoothTerm,
    P: ProxTerm + ?Sized,
{
    let mut state = SolverState::start(ev, x0);
    let residual = ev.residual(&mut state.v_curr);
    let mut trace = SolverTrace::default();
    trace.records.push(IterationRecord {
        iter: 0,
        f_value: state.v_curr.f,
        residual,
        cum_f_evals: ev.f_evals(),
        cum_grad_evals: ev.grad_evals(),
        step: 0.0,
        branch: Branch::Init,
        c_avg: state.c_avg,
        q: state.q,
        t: state.t_curr,
        u_search: None,
        z_search: None,
        proposals: Vec::new(),
    });
    let mut best = (state.v_curr.x.clone(), state.v_curr.f);
    if !(state.v_curr.f.is_finite()) {
        panic!("objective is not finite at the initial point");
    }
    if residual <= config.tol_residual {
        return Minimization { x: best.0, f_value: best.1, trace, termination: Termination::Residual };
    }

    let mut stalled = 0;
    let mut termination = Termination::MaxIter;
    while state.k < config.max_iter {
        let f_before = state.v_curr.f;
        let mut record = napg_iterate(&mut state, ev, config, backtrack);
        record.residual = ev.residual(&mut state.v_curr);
        let f_after = state.v_curr.f;
        if f_after < best.1 {
            best = (state.v_curr.x.clone(), f_after);
        }
        let converged = record.residual <= config.tol_residual;
        trace.records.push(record);
        if converged {
            termination = Termination::Residual;
            break;
        }
        if (f_after - f_before).abs() <= config.tol_f_rel * f_before.abs().max(1.0) {
            stalled += 1;
            if stalled >= STALL_WINDOW {
                termination = Termination::Stagnation;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Minimization { x: best.0, f_value: best.1, trace, termination }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::testing::{DiagonalQuadratic, Zero};
    use crate::solver::{minimize, Variant};
    use ndarray::array;

    #[test]
    fn momentum_weight_example() {
        assert!((momentum_update(1.0) - (5f64.sqrt() + 1.0) / 2.0).abs() < 1e-15);
        assert!((momentum_update(1.0) - 1.618_03).abs() < 1e-5);
    }

    #[test]
    fn average_update_examples() {
        let (q2, c2) = average_update(0.8, 1.0, 4.0, 2.0);
        assert!((q2 - 1.8).abs() < 1e-15);
        assert!((c2 - 2.888_89).abs() < 1e-5);
    }

    fn toy() -> DiagonalQuadratic {
        DiagonalQuadratic { diag: array![0.9, 0.3, 0.05], centre: array![1.0, -2.0, 0.5] }
    }

    #[test]
    fn monotone_regime_tracks_last_value() {
        let f = toy();
        let cfg = SolverConfig { eta: 0.0, max_iter: 30, tol_residual: 0.0, ..Default::default() };
        let out = minimize(&f, &Zero, array![3.0, 3.0, 3.0].view(), &cfg);
        for r in &out.trace.records[1..] {
            assert_eq!(r.c_avg, r.f_value);
        }
    }

    #[test]
    fn q_matches_geometric_sum() {
        let f = toy();
        let cfg = SolverConfig { eta: 0.7, max_iter: 60, tol_residual: 0.0, tol_f_rel: 0.0, ..Default::default() };
        let out = minimize(&f, &Zero, array![3.0, 3.0, 3.0].view(), &cfg);
        for r in &out.trace.records {
            let closed: f64 = (0..=r.iter).map(|i| 0.7f64.powi(i as i32)).sum();
            assert!((r.q - closed).abs() <= 1e-12);
        }
    }

    #[test]
    fn momentum_grows_at_least_linearly() {
        let mut t = 1.0;
        for k in 1..=100_000usize {
            let next = momentum_update(t);
            assert!(next > t);
            t = next;
            assert!(t >= (k as f64 + 2.0) / 2.0 - 1.0);
        }
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let f = toy();
        let cfg = SolverConfig::default();
        let out = minimize(&f, &Zero, f.centre.view(), &cfg);
        assert_eq!(out.termination, Termination::Residual);
        assert_eq!(out.trace.records.len(), 1);
        assert_eq!(out.x, f.centre);
    }

    #[test]
    fn converges_on_quadratic() {
        let f = toy();
        for variant in [Variant::NapgPoly, Variant::NapgBacktracking] {
            let cfg = SolverConfig { variant, tol_residual: 1e-10, tol_f_rel: 0.0, ..Default::default() };
            let out = minimize(&f, &Zero, array![3.0, 3.0, 3.0].view(), &cfg);
            let err = (&out.x - &f.centre).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            assert!(err < 1e-8, "{variant:?}: {err}");
            assert_eq!(out.termination, Termination::Residual);
        }
    }

    #[test]
    fn counters_are_monotone() {
        let f = toy();
        let out = minimize(&f, &Zero, array![3.0, 3.0, 3.0].view(), &SolverConfig::default());
        for pair in out.trace.records.windows(2) {
            assert!(pair[1].cum_f_evals >= pair[0].cum_f_evals);
            assert!(pair[1].cum_grad_evals >= pair[0].cum_grad_evals);
        }
    }
}
