use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Which member of the APG family to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    NapgPoly,
    NapgBacktracking,
    Papg,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::NapgPoly, Variant::NapgBacktracking, Variant::Papg];

    pub fn name(self) -> &'static str {
        match self {
            Variant::NapgPoly => "napg-poly",
            Variant::NapgBacktracking => "napg-backtracking",
            Variant::Papg => "papg",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('_', "-").as_str() {
            "napg-poly" => Ok(Variant::NapgPoly),
            "napg-backtracking" => Ok(Variant::NapgBacktracking),
            "papg" => Ok(Variant::Papg),
            other => Err(format!("unknown solver `{other}`")),
        }
    }
}

/// Algorithm constants, step caps and stopping rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Memory of the nonmonotone average, in `[0, 1]`; 0 is monotone.
    pub eta: f64,
    /// Sufficient-decrease margin on `‖x⁺ − x‖²`.
    pub delta: f64,
    /// Constant of the standalone interpolation search's decrease test.
    pub c1: f64,
    /// Interpolated steps are kept in `[tau1·α, tau2·α]`.
    pub tau1: f64,
    pub tau2: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Trial step used when there is no displacement to build a BB step from.
    pub initial_step: f64,
    pub max_iter: usize,
    pub max_ls_iter: usize,
    pub tol_residual: f64,
    pub tol_f_rel: f64,
    pub variant: Variant,
    /// Step of the fixed-step variant.
    pub fixed_step: f64,
}

/// Consecutive small objective changes that count as stagnation.
pub(crate) const STALL_WINDOW: usize = 5;

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta: 0.8,
            delta: 1e-4,
            c1: 1e-4,
            tau1: 0.1,
            tau2: 0.9,
            alpha_min: 1e-10,
            alpha_max: 1e10,
            initial_step: 1.0,
            max_iter: 5000,
            max_ls_iter: 30,
            tol_residual: 1e-6,
            tol_f_rel: 1e-10,
            variant: Variant::NapgPoly,
            fixed_step: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(validation(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.delta > 0.0) {
            return Err(validation(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(validation(format!("c1 must lie in (0, 1), got {}", self.c1)));
        }
        if !(self.tau1 > 0.0 && self.tau1 <= self.tau2 && self.tau2 < 1.0) {
            return Err(validation(format!(
                "need 0 < tau1 <= tau2 < 1, got tau1 = {}, tau2 = {}",
                self.tau1, self.tau2
            )));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_max) {
            return Err(validation("need 0 < alpha_min <= alpha_max"));
        }
        if !(self.initial_step > 0.0 && self.fixed_step > 0.0) {
            return Err(validation("step sizes must be positive"));
        }
        if self.max_ls_iter == 0 {
            return Err(validation("max_ls_iter must be at least 1"));
        }
        if !(self.tol_residual >= 0.0 && self.tol_f_rel >= 0.0) {
            return Err(validation("tolerances must be nonnegative"));
        }
        Ok(())
    }
}
