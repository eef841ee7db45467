//! Bipartite record linkage.
//!
//! Two duplicate-free datafiles are merged by estimating the bipartite
//! matching between their records. The crate provides
//!
//! * comparison vectors with ordinal disagreement levels ([`comparison`]),
//! * the Fellegi-Sunter mixture model with EM, the assignment-based
//!   maximum-likelihood matching and the three-way decision rule
//!   ([`fs_mixture`]),
//! * Bayesian beta record linkage: a beta prior over bipartite matchings,
//!   a Gibbs sampler and an exact enumeration for small instances
//!   ([`beta_rl`]),
//! * Bayes point estimates under additive losses, with an optional
//!   rejection option ([`estimators`]),
//! * accuracy metrics and convergence diagnostics ([`evaluation`]),
//! * a synthetic datafile-pair generator ([`synth`]),
//! * the clerical-review workflow for rejected records ([`review`]).
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod beta_rl;
pub mod comparison;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod fs_mixture;
pub mod io;
pub mod lsap;
pub mod review;
pub mod scalar;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use scalar::Real;
pub use types::{DataFile, FieldKind, FieldSchema, FilePair, MatchingLabeling, MatchingMatrix, Record};

pub type PhiParams64 = fs_mixture::PhiParams<f64>;
pub type PhiParams32 = fs_mixture::PhiParams<f32>;
pub type PriorConfig64 = beta_rl::PriorConfig<f64>;
pub type LossConfig64 = estimators::LossConfig<f64>;
pub type Marginals64 = estimators::Marginals<f64>;
pub type Marginals32 = estimators::Marginals<f32>;
