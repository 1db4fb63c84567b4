//! Two-stage stochastic linear programs with germ-affine coefficients.
//!
//! Expressions are sums of terms `coef · [germ] · [variable]`: at most one germ
//! (in natural units) and at most one decision variable per term. For any
//! fixed realization the model is an ordinary LP.

mod expr;
mod format;
mod model;

pub use expr::{AffineExpr, AffineTerm, Expr, Factor, GermId, Term, VarId};
pub use format::{load_model, read_model, save_model, write_model, MODEL_HEADER};
pub use model::{Constraint, ModelSummary, Sense, Stage, StochModel, VarBlock, VarHandle};
