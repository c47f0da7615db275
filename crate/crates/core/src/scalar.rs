//! Scalar abstractions for tree arithmetic.
//!
//! Two tiers:
//! - [`Scalar`] is a field-like value: enough for conditional expectations,
//!   gains, covariance forms and everything else that is plain `+ - * /`.
//!   Exact rational types qualify, which lets tests cross-check the
//!   floating-point operators against exact arithmetic.
//! - [`Real`] adds IEEE floating point (`sqrt`, comparisons against
//!   tolerances, condition estimates) and is what the solvers require.

use std::fmt::Debug;
use std::ops::Neg;

use num_traits::{FromPrimitive, Num};

/// Field-like scalar: exact rationals and floats both qualify.
pub trait Scalar: Num + Clone + PartialOrd + Neg<Output = Self> + Debug {}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + Neg<Output = Self> + Debug {}

/// Floating-point scalar used by the solvers and anything with a tolerance.
pub trait Real: Scalar + num_traits::Float + FromPrimitive {
    /// Lossless-enough conversion of an `f64` constant (tolerances, grid
    /// values) into this type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in this scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
