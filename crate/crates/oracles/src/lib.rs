//! Reference implementations for checking `trajspace`.
//!
//! Everything here is written the slow, obvious way: dense Jacobi
//! eigen-solves, de Boor evaluation, all-pairs grid search, enumeration of
//! every 2-partition. The [`checks`] module compares the library against
//! them.

pub mod checks;
pub mod clustering;
pub mod fixtures;
pub mod grid;
pub mod metrics;
pub mod numerics;
pub mod spline;
