//! Shared inputs for the benchmarks.

use aliquot_core::beta::BetaJConfig;

/// Cutoffs used across the sieve benchmarks.
pub const SIEVE_SIZES: [u64; 3] = [100_000, 1_000_000, 10_000_000];

/// A mid-sized beta configuration (j = 3, N_j = 10^6).
pub fn beta_config() -> BetaJConfig {
    BetaJConfig::new(3, 1_000_000, 0.6).expect("valid configuration")
}
