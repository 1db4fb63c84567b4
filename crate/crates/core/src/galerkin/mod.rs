//! Stochastic Galerkin projection of a [`StochModel`](crate::sprog::StochModel)
//! onto a polynomial chaos basis, and evaluation of the solved policies.
//!
//! First-stage variables keep a single column (their constant mode). Each
//! recourse variable gets one coefficient column per basis mode. Equalities
//! are enforced mode by mode; each inequality `h ≤ 0` becomes
//! `h̃_0 + λ‖h̃_{α≠0}‖ ≤ 0`; the objective is the constant mode of the cost.

mod policy;
mod project;

pub use policy::{evaluate_policy, residual, RecoursePolicy};
pub use project::{
    basis_for, expand_recourse, project_equality, project_inequality, project_model,
    project_objective, Column, ColumnLayout, LinForm, ProjectedEquality, ProjectedInequality,
    ProjectedProgram, ProjectionReport, ProjectionSettings, RowId, TailBound,
};
