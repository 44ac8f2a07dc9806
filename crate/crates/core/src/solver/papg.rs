//! Fixed-step accelerated proximal gradient with function-value restart.

use ndarray::ArrayView1;

use super::config::STALL_WINDOW;
use super::eval::Evaluator;
use super::trace::{Branch, IterationRecord, SolverTrace, Termination};
use super::{Minimization, ProxTerm, SmoothTerm, SolverConfig};

pub(crate) fn run<S, P>(ev: &Evaluator<'_, S, P>, x0: ArrayView1<'_, f64>, config: &SolverConfig) -> Minimization
where
    S: SmoothTerm,
    P: ProxTerm + ?Sized,
{
    let step = config.fixed_step;
    let mut v = ev.eval(x0.to_owned());
    assert!(v.f.is_finite(), "objective is not finite at the initial point");
    let mut v_prev = v.x.clone();
    let (mut t_prev, mut t) = (1.0, 1.0);

    let mut trace = SolverTrace::default();
    let residual = ev.residual(&mut v);
    trace.records.push(IterationRecord {
        iter: 0,
        f_value: v.f,
        residual,
        cum_f_evals: ev.f_evals(),
        cum_grad_evals: ev.grad_evals(),
        step: 0.0,
        branch: Branch::Init,
        c_avg: v.f,
        q: 1.0,
        t,
        u_search: None,
        z_search: None,
        proposals: Vec::new(),
    });
    let mut best = (v.x.clone(), v.f);
    if residual <= config.tol_residual {
        return Minimization { x: best.0, f_value: best.1, trace, termination: Termination::Residual };
    }

    let mut stalled = 0;
    let mut termination = Termination::MaxIter;
    for iter in 1..=config.max_iter {
        let beta = (t_prev - 1.0) / t;
        let y_x = &v.x + &((&v.x - &v_prev) * beta);
        let mut y = if beta == 0.0 { v.clone() } else { ev.eval(y_x) };
        let grad = ev.grad(&mut y).clone();
        let candidate = ev.eval(ev.prox_step(y.x.view(), grad.view(), step));
        let f_before = v.f;
        let branch = if candidate.f <= v.f {
            v_prev = std::mem::replace(&mut v, candidate).x;
            t_prev = t;
            t = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            Branch::Step
        } else {
            v_prev = v.x.clone();
            t_prev = 1.0;
            t = 1.0;
            Branch::Restart
        };
        let residual = ev.residual(&mut v);
        if v.f < best.1 {
            best = (v.x.clone(), v.f);
        }
        trace.records.push(IterationRecord {
            iter,
            f_value: v.f,
            residual,
            cum_f_evals: ev.f_evals(),
            cum_grad_evals: ev.grad_evals(),
            step: if branch == Branch::Step { step } else { 0.0 },
            branch,
            c_avg: v.f,
            q: 1.0,
            t,
            u_search: None,
            z_search: None,
            proposals: Vec::new(),
        });
        if residual <= config.tol_residual {
            termination = Termination::Residual;
            break;
        }
        if branch == Branch::Step && (v.f - f_before).abs() <= config.tol_f_rel * f_before.abs().max(1.0) {
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
