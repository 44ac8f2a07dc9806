use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::linesearch::StepProposal;
use crate::error::Result;

/// How the new iterate was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Starting point, before any iteration.
    Init,
    /// The extrapolated step passed the nonmonotone test directly.
    UBranch,
    /// A second search from the current iterate ran, but the extrapolated
    /// candidate was still at least as good.
    ZBranchU,
    /// The second search's candidate won.
    ZBranchZ,
    /// Both searches ran out of trials without an admissible point; the
    /// iterate was kept.
    Hold,
    /// Fixed-step iteration.
    Step,
    /// Fixed-step iteration rejected for increasing F; momentum reset.
    Restart,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Init => "init",
            Branch::UBranch => "u-branch",
            Branch::ZBranchU => "z-branch-u",
            Branch::ZBranchZ => "z-branch-z",
            Branch::Hold => "hold",
            Branch::Step => "step",
            Branch::Restart => "restart",
        }
    }
}

/// Which inequality a line search had to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcceptTest {
    /// `F(x⁺) ≤ F(anchor) − δ‖x⁺ − anchor‖²` or `F(x⁺) ≤ c − δ‖x⁺ − anchor‖²`.
    AnchorOrAverage,
    /// `F(x⁺) ≤ c − δ‖x⁺ − anchor‖²`.
    Average,
}

/// Values needed to re-check one line search's acceptance after the fact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceCheck {
    pub test: AcceptTest,
    pub f_candidate: f64,
    pub f_anchor: f64,
    pub c_ref: f64,
    pub dist_sq: f64,
    pub delta: f64,
    pub step: f64,
    /// False when the search ran out of trials and returned its best point.
    pub accepted: bool,
}

impl AcceptanceCheck {
    pub fn holds(&self) -> bool {
        let margin = self.delta * self.dist_sq;
        let vs_average = self.f_candidate <= self.c_ref - margin;
        match self.test {
            AcceptTest::Average => vs_average,
            AcceptTest::AnchorOrAverage => vs_average || self.f_candidate <= self.f_anchor - margin,
        }
    }
}

/// One row of the convergence trace, describing the iterate after `iter`
/// completed iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub f_value: f64,
    /// `‖x − prox_g(x − ∇f(x))‖` at the iterate.
    pub residual: f64,
    pub cum_f_evals: usize,
    pub cum_grad_evals: usize,
    /// Accepted step size (0 for the initial row and held iterations).
    pub step: f64,
    pub branch: Branch,
    /// Nonmonotone reference value after the update.
    pub c_avg: f64,
    pub q: f64,
    pub t: f64,
    pub u_search: Option<AcceptanceCheck>,
    pub z_search: Option<AcceptanceCheck>,
    pub proposals: Vec<StepProposal>,
}

/// Why a solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Residual,
    Stagnation,
    MaxIter,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Residual => "residual",
            Termination::Stagnation => "stagnation",
            Termination::MaxIter => "max-iter",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
}

impl SolverTrace {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn iterations(&self) -> usize {
        self.last().map_or(0, |r| r.iter)
    }

    /// First row whose residual is at most `tol`.
    pub fn first_below(&self, tol: f64) -> Option<&IterationRecord> {
        self.records.iter().find(|r| r.residual <= tol)
    }

    pub const CSV_HEADER: [&'static str; 7] =
        ["iter", "f_value", "residual", "cum_f_evals", "cum_grad_evals", "step", "branch"];

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.iter.to_string(),
                format!("{}", r.f_value),
                format!("{}", r.residual),
                r.cum_f_evals.to_string(),
                r.cum_grad_evals.to_string(),
                format!("{}", r.step),
                r.branch.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }
}
