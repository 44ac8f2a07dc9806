//! Sparse linear biomarker combinations that maximize a weighted Youden index.
//!
//! The weighted Youden index `J = 2(π·Se + (1 − π)·Sp) − 1` of the rule
//! `ωᵀT > c` is smoothed with the normal distribution function, penalized with
//! SCAD on `ω`, and minimized with a nonmonotone accelerated proximal gradient
//! method whose line search interpolates the objective along the
//! proximal-gradient path.
//!
//! Module map:
//!
//! * [`data`]: datasets, rules, hyperparameters, CSV I/O and splitting.
//! * [`objective`]: the smoothed objective, its gradient and empirical metrics.
//! * [`penalty`]: SCAD, its proximal map and the gradient mapping.
//! * [`solver`]: NAPG with interpolation or halving line search, and fixed-step APG.
//! * [`pipeline`]: bandwidth, initialization, cross-validation, fitting, evaluation.
//! * [`baseline`]: lasso-penalized logistic regression plus a cutoff scan.
//! * [`simgen`]: simulation scenarios and the replication harness.

pub mod baseline;
pub mod data;
pub mod error;
pub mod normal;
pub mod objective;
pub mod parallel;
pub mod penalty;
pub mod pipeline;
pub mod simgen;
pub mod solver;

pub use data::{BiomarkerDataset, EvalMetrics, HyperParams, RulePoint};
pub use error::{Error, Result};
