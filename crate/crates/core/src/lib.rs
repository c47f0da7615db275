//! Fair pricing and quadratic hedging on finite scenario trees.
//!
//! The library prices contingent claims in discrete-time multi-asset
//! models by minimizing the expected squared terminal hedging error,
//! measured in the units of a tradable numeraire. It provides:
//!
//! - [`market`]: scenario trees as finite filtered probability spaces,
//!   with exact conditional expectation, Doob decomposition, and the
//!   numeraire-weighted covariance form;
//! - [`numeraire`]: tradable numeraires generated by self-financing
//!   strategies, denominated prices, and the self-financing lift;
//! - [`hedging`]: the backward recursion for the optimal positions, the
//!   conditional fair-price process, and the residual martingale;
//! - [`oracle`]: an independent global least-squares solver used to
//!   validate the recursion and certify replicability;
//! - [`perturbation`]: scale families of numeraires, stability sweeps,
//!   and closed-form first-order corrections validated against central
//!   finite differences;
//! - [`fixtures`] and [`instances`]: built-in example models and seeded
//!   random instances.
//!
//! Core arithmetic is generic over the scalar: the conditional operators
//! accept any field-like type (exact rationals included), while the
//! solvers require IEEE floats. The aliases below fix the two supported
//! float widths.

pub mod fixtures;
pub mod hedging;
pub mod instances;
mod linalg;
pub mod market;
pub mod numeraire;
pub mod oracle;
pub mod perturbation;
pub mod scalar;

pub use scalar::{Real, Scalar};

/// Scenario tree over `f64` values.
pub type Tree64 = market::ScenarioTree<f64>;
/// Scenario tree over `f32` values.
pub type Tree32 = market::ScenarioTree<f32>;
/// Claim over `f64` values.
pub type Claim64 = market::Claim<f64>;
/// Strategy over `f64` values.
pub type Strategy64 = market::Strategy<f64>;
/// Numeraire over `f64` values.
pub type Numeraire64 = numeraire::NumeraireSpec<f64>;
/// Hedging decomposition over `f64` values.
pub type Decomposition64 = hedging::Decomposition<f64>;
/// Global least-squares solution over `f64` values.
pub type OracleSolution64 = oracle::OracleSolution<f64>;
/// First-order corrections over `f64` values.
pub type Corrections64 = perturbation::AsymptoticCorrections<f64>;
