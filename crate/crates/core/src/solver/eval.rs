//! Point evaluation with counters.
//!
//! Gradients computed only to monitor stationarity are not charged to the
//! solver; they are charged the first time the algorithm itself uses them.

use std::cell::Cell;

use ndarray::{Array1, ArrayView1, Zip};

use super::{ProxTerm, SmoothTerm};

/// An evaluated point: `x`, `F(x) = f(x) + g(x)` and an optional gradient.
#[derive(Clone)]
pub(crate) struct Point<C> {
    pub x: Array1<f64>,
    pub f: f64,
    cache: C,
    grad: Option<Array1<f64>>,
    charged: bool,
}

pub(crate) struct Evaluator<'a, S: SmoothTerm, P: ProxTerm + ?Sized> {
    pub smooth: &'a S,
    pub penalty: &'a P,
    f_evals: Cell<usize>,
    grad_evals: Cell<usize>,
}

impl<'a, S: SmoothTerm, P: ProxTerm + ?Sized> Evaluator<'a, S, P> {
    pub fn new(smooth: &'a S, penalty: &'a P) -> Self {
        Self {
            smooth,
            penalty,
            f_evals: Cell::new(0),
            grad_evals: Cell::new(0),
        }
    }

    pub fn f_evals(&self) -> usize {
        self.f_evals.get()
    }

    pub fn grad_evals(&self) -> usize {
        self.grad_evals.get()
    }

    pub fn eval(&self, x: Array1<f64>) -> Point<S::Cache> {
        self.f_evals.set(self.f_evals.get() + 1);
        let (f, cache) = self.smooth.value(x.view());
        let f = f + self.penalty.value(x.view());
        Point {
            x,
            f,
            cache,
            grad: None,
            charged: false,
        }
    }

    /// Gradient for algorithmic use; charged once per point.
    pub fn grad<'p>(&self, point: &'p mut Point<S::Cache>) -> &'p Array1<f64> {
        if !point.charged {
            self.grad_evals.set(self.grad_evals.get() + 1);
            point.charged = true;
        }
        self.monitor_grad(point)
    }

    fn monitor_grad<'p>(&self, point: &'p mut Point<S::Cache>) -> &'p Array1<f64> {
        if point.grad.is_none() {
            point.grad = Some(self.smooth.gradient(point.x.view(), &point.cache));
        }
        point.grad.as_ref().unwrap()
    }

    /// `‖x − prox_g(x − ∇f(x))‖`, without charging the gradient.
    pub fn residual(&self, point: &mut Point<S::Cache>) -> f64 {
        let grad = self.monitor_grad(point).clone();
        let moved = self.prox_step(point.x.view(), grad.view(), 1.0);
        let d = &point.x - &moved;
        d.dot(&d).sqrt()
    }

    /// `prox_{α·g}(x − α·grad)`.
    pub fn prox_step(&self, x: ArrayView1<'_, f64>, grad: ArrayView1<'_, f64>, alpha: f64) -> Array1<f64> {
        let trial = Zip::from(&x).and(&grad).map_collect(|&xi, &gi| xi - alpha * gi);
        self.penalty.prox(trial.view(), alpha)
    }
}

pub(crate) fn dist_sq(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    Zip::from(&a).and(&b).fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y))
}
