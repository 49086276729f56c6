//! Stochastic variance-reduced ADMM (SVRG-ADMM).
//!
//! Solves composite problems of the form
//!
//! ```text
//! minimize  (1/n) Σ f_i(x) + g(y)
//! subject to Ax + By = c
//! ```
//!
//! where each `f_i` is smooth, `g` has a cheap proximal operator and `B = ±I`.
//! The crate provides:
//!
//! * [`problems`]: losses, the ℓ1 regularizer, problem builders (graph-guided
//!   fused lasso, total-variation regression) and LIBSVM ingestion.
//! * [`solver`]: the three stage-based drivers (strongly convex, general
//!   convex, nonconvex), the exact and linearized x-updates and an OPG-ADMM
//!   warm start.
//! * [`advisor`]: the penalty, stepsize and inner-iteration theory (`ρ*`,
//!   `γ_min`, `κ`, `(η*, m*)`, nonconvex feasibility).
//! * [`metrics`]: `R(x, y)`, `J(x)`, the augmented Lagrangian, the proximal
//!   gradient stationarity measure, reference solves and trace records.
//! * [`matspec`]: spectral and least-squares helpers for the constraint matrix.

pub mod advisor;
mod error;
pub mod matspec;
pub mod metrics;
pub mod problems;
pub mod solver;

pub use error::{Error, Result};

pub use matspec::{ConstraintMatrix, SpectralSummary};
pub use metrics::{ReferenceSolution, TraceRecord};
pub use problems::{
    BForm, ConstrainedProblem, LossKind, Regularizer, SampleSet, SmoothSum,
};
pub use solver::{RunResult, SolverConfig, UpdateMode, Variant};
