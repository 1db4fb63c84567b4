//! Intrusive polynomial chaos for two-stage stochastic linear programs.
//!
//! A [`sprog::StochModel`] whose coefficients are affine in independent
//! germs is projected onto a total-degree orthonormal basis
//! ([`multibasis::MultiIndexBasis`]) by stochastic Galerkin projection
//! ([`galerkin`]). Equalities become linear coefficient identities, chance
//! constraints become second-order cones, and the result is solved as one
//! conic program ([`conic`]). Scenario approximation ([`sa_benchmark`]) and
//! Monte-Carlo validation ([`mcvalidate`]) check the resulting policy.

pub mod cli;
pub mod conic;
pub mod error;
pub mod galerkin;
pub mod mcvalidate;
pub mod multibasis;
pub mod pce;
pub mod polybasis;
pub mod sa_benchmark;
pub mod sampling;
pub mod sprog;
pub mod vpp;

pub use error::{Error, Result};
