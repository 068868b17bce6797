//! Orthonormal rational functions with periodically repeated real poles,
//! their GMP matrix representations, finite-gap potential theory and
//! regularity diagnostics.

pub mod cheb;
pub mod config;
pub mod discriminant;
pub mod error;
pub mod gmp;
pub mod measure;
pub mod moebius;
pub mod orf;
pub mod pipeline;
pub mod potential;
pub mod regularity;
pub mod mp;

pub use error::{Error, Result};
pub use measure::{FiniteGapSet, Measure, PoleSequence};
pub use moebius::{ExtendedReal, MoebiusMap};
