//! Means, variances and covariance of the raw-conditional (`R`) and
//! marginalisation (`M`) estimators of the causal effect of X on Y in the
//! binary v-structure X -> Y <- Z, for randomly and block-randomly assigned
//! X, together with the minimum-variance combination of the two.
//!
//! Moments are available analytically ([`analytic`]), by exact enumeration
//! or binomial mixing ([`oracles`]) and by seeded Monte Carlo
//! ([`simulate`]).

#![allow(clippy::needless_range_loop)]

pub mod analytic;
pub mod combine;
pub mod errata;
pub mod error;
pub mod estimators;
pub mod golden;
pub mod hypergeom;
pub mod model;
pub mod numeric;
pub mod oracles;
pub mod par;
pub mod report;
pub mod simulate;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use model::{CellKind, CellProbs, Design, EffectParams, Regime, VStructParams};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
