//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All math is written against [`Scalar`] so the same code runs in `f32`
//! and `f64`. Constants and configuration values live in `f64` and are
//! converted at the boundary with [`Scalar::of`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::NdFloat;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    NdFloat
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
{
    /// Converts an `f64` constant into this scalar type.
    fn of(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// Tolerance used for rank decisions and convergence tests.
    fn tiny() -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }

    #[inline]
    fn tiny() -> Self {
        1e-6
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }

    #[inline]
    fn tiny() -> Self {
        1e-13
    }
}
