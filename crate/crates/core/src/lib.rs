//! Certified numerical bounds on the aliquot constant.
//!
//! The constant `lambda` is the limiting mean of `log(s(2n) / 2n)`, where
//! `s(n)` is the sum of the proper divisors of `n`. It splits as
//! `lambda = alpha - beta`; this crate computes a certified upper bound for
//! `alpha` ([`alpha`]), a certified lower bound for `beta` ([`beta`]) and
//! combines them ([`lambda`]). Supporting modules provide divisor arithmetic,
//! segmented sieves, empirical means and an aliquot-sequence tracer.

pub mod aliquot;
pub mod alpha;
pub mod arith;
pub mod beta;
pub mod checkpoint;
pub mod error;
pub mod lambda;
pub mod means;
pub mod numerics;
pub mod primes;
pub mod selftest;

pub use arith::{Effort, Factorization};
pub use error::{Error, Result};
pub use numerics::{BlockSumPlan, CertifiedValue, CombineKind, CompensatedSum};

/// Version tag embedded in every serialized report.
pub const SCHEMA_VERSION: u32 = 1;
