//! Certified upper bound for `alpha = 2 alpha(2) + sum_{p odd} alpha(p)`.
//!
//! For an odd prime `p` the per-prime series is
//! `alpha(p) = sum_{m >= 1} p^-m log(1 + 1 / (p + ... + p^m))`, truncated at
//! depth `M` with tail at most `A(p, M) = p / (p - 1) * p^(-2(M + 1))`.
//! Primes above the cutoff `N` contribute at most `1 / N` in total.
//!
//! The 2-adic part `2 alpha(2)` is evaluated in the rearranged form
//! `log 2 + sum_{m >= 1} 2^-m log(1 - 2^-(m + 1))`, whose terms decay like
//! `4^-m`; the tail after `L` terms is below `2 A(2, L)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{add_up, collect_blocks, inflate, merge_ordered, BlockSumPlan, CertifiedValue, CompensatedSum, UNIT_ROUNDOFF};
use crate::primes::{primes_in_window, sieving_primes, MAX_SIEVE_LIMIT};
use crate::SCHEMA_VERSION;

/// Integers per parallel prime block.
pub const ALPHA_BLOCK: u64 = 1 << 21;

/// Relative evaluation error allowed per series term (a handful of roundings
/// plus `ln_1p`).
const TERM_REL_ERR: f64 = 16.0 * UNIT_ROUNDOFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaParams {
    /// Prime cutoff.
    #[serde(rename = "N")]
    pub n: u64,
    /// Depth of the 2-adic series.
    #[serde(rename = "L")]
    pub l: u32,
    /// Depth of each odd-prime series.
    #[serde(rename = "M")]
    pub m: u32,
}

impl Default for AlphaParams {
    fn default() -> Self {
        Self {
            n: 1_000_000,
            l: 15,
            m: 15,
        }
    }
}

impl AlphaParams {
    pub fn new(n: u64, l: u32, m: u32) -> Result<Self> {
        let p = Self { n, l, m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n <= 2 {
            return Err(Error::param(format!("alpha: need N > 2, got {}", self.n)));
        }
        if self.n > MAX_SIEVE_LIMIT {
            return Err(Error::param(format!("alpha: N = {} exceeds the sieve limit {MAX_SIEVE_LIMIT}", self.n)));
        }
        if self.l <= 1 || self.m <= 1 {
            return Err(Error::param(format!("alpha: need L, M > 1, got L = {}, M = {}", self.l, self.m)));
        }
        if self.l > 1000 || self.m > 1000 {
            return Err(Error::param("alpha: L and M are capped at 1000"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBreakdown {
    /// `2 A(2, L)`.
    pub two_adic: f64,
    /// `sum_{3 <= p <= N} A(p, M)`, rounded up.
    pub odd_prime_powers: f64,
    /// `1 / N`, rounded up.
    pub large_primes: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub schema_version: u32,
    pub params: AlphaParams,
    /// The truncated sums with their floating-point error.
    pub sums: CertifiedValue,
    pub tail_total: f64,
    pub tail: TailBreakdown,
    /// `sums.value + sums.error_radius + tail_total`, rounded up.
    pub upper_bound: f64,
    /// Number of odd primes up to `N`.
    pub odd_prime_count: u64,
}

/// `p^-m` as a float, exact whenever it is representable.
fn inv_pow(p: u64, m: u32) -> f64 {
    match p.checked_pow(m) {
        Some(pm) if pm <= 1 << 53 => 1.0 / pm as f64,
        _ => (1.0 / p as f64).powi(m as i32),
    }
}

/// Term without overflow checks: falls back to floating point when `p^m`
/// leaves the integer range.
fn alpha_term_wide(p: u64, m: u32) -> f64 {
    if let Some(pm) = p.checked_pow(m) {
        // p + ... + p^m = p (p^m - 1) / (p - 1)
        let denom = (pm - 1) / (p - 1) * p;
        let denom_f = if (pm - 1) / (p - 1) <= u64::MAX / p {
            denom as f64
        } else {
            p as f64 * ((pm - 1) / (p - 1)) as f64
        };
        (1.0 / denom_f).ln_1p() / pm as f64
    } else {
        let pf = p as f64;
        let inv = inv_pow(p, m);
        // 1 / (p + ... + p^m) = p^-m (1 - 1/p) / (1 - p^-m)
        let x = inv * (1.0 - 1.0 / pf) / (1.0 - inv);
        x.ln_1p() * inv
    }
}

/// `p^-m log(1 + 1 / (p + ... + p^m))`.
pub fn alpha_term(p: u64, m: u32) -> Result<f64> {
    if p < 2 || m == 0 {
        return Err(Error::param("alpha_term needs p >= 2 and m >= 1"));
    }
    let pm = p.checked_pow(m).ok_or(Error::Overflow("p^m in alpha_term"))?;
    let geometric = (pm - 1) / (p - 1);
    let denom = geometric.checked_mul(p).map_or_else(|| p as f64 * geometric as f64, |d| d as f64);
    Ok((1.0 / denom).ln_1p() / pm as f64)
}

/// The same per-prime series in its product-derived form,
/// `(1 - 1/p) sum_{m=1}^{depth} p^-m log(1 + 1/p + ... + 1/p^m)`.
pub fn alpha_prime_series_product_form(p: u64, depth: u32) -> f64 {
    let pf = p as f64;
    let mut acc = CompensatedSum::new();
    let mut partial = 1.0;
    let mut inv = 1.0;
    for _ in 1..=depth {
        inv /= pf;
        partial += inv;
        acc.add(inv * partial.ln());
    }
    (1.0 - 1.0 / pf) * acc.value()
}

/// `sum_{m=1}^{depth} alpha_term(p, m)`.
pub fn alpha_prime_series(p: u64, depth: u32) -> f64 {
    let mut acc = CompensatedSum::new();
    for m in 1..=depth {
        acc.add(alpha_term_wide(p, m));
    }
    acc.value()
}

/// Truncation bound `A(p, M) = p / (p - 1) * p^(-2(M + 1))`.
pub fn tail_a(p: u64, m: u32) -> f64 {
    let pf = p as f64;
    let inv = inv_pow(p, m + 1);
    pf / (pf - 1.0) * inv * inv
}

/// `2 alpha(2)` truncated after `L` terms of the rearranged series. The
/// truncation tail (at most `2 A(2, L)`) is left to the caller.
pub fn alpha_two_part(l: u32) -> Result<CertifiedValue> {
    if l <= 1 {
        return Err(Error::param("alpha_two_part needs L > 1"));
    }
    let mut acc = CompensatedSum::new();
    acc.add(std::f64::consts::LN_2);
    for m in 1..=l {
        let w = inv_pow(2, m);
        acc.add(w * (-inv_pow(2, m + 1)).ln_1p());
    }
    Ok(acc.certify_with_term_error(TERM_REL_ERR))
}

/// The literal 2-adic sum `sum_{m=1}^{L} 2^-m log(1 + 1/2 + ... + 1/2^m)`,
/// whose truncation error decays only like `2^-L`. Kept for cross-checks.
pub fn alpha_two_literal(l: u32) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut partial = 1.0;
    for m in 1..=l {
        let w = inv_pow(2, m);
        partial += w;
        acc.add(w * partial.ln());
    }
    acc.value()
}

struct BlockOut {
    series: CertifiedValue,
    tails: CertifiedValue,
    primes: u64,
}

/// Certified upper bound for `alpha` at cutoff `N` and depths `L`, `M`.
pub fn alpha_upper_bound(params: &AlphaParams, workers: usize) -> Result<AlphaResult> {
    params.validate()?;
    let base = sieving_primes(params.n);
    let plan = BlockSumPlan::new(3, params.n, ALPHA_BLOCK)?;
    let depth = params.m;
    let blocks = collect_blocks(&plan, workers, |lo, hi| {
        let mut series = CompensatedSum::new();
        let mut tails = CompensatedSum::new();
        let primes = primes_in_window(lo, hi, &base);
        for &p in &primes {
            for m in 1..=depth {
                series.add(alpha_term_wide(p, m));
            }
            tails.add(tail_a(p, depth));
        }
        // Terms that fall into the subnormal range carry an absolute error
        // of at most one subnormal ulp each.
        let subnormal = series.len() as f64 * f64::from_bits(1);
        Ok(BlockOut {
            series: series.certify_with_term_error(TERM_REL_ERR).widen(subnormal),
            tails: tails.certify_with_term_error(TERM_REL_ERR).widen(subnormal),
            primes: primes.len() as u64,
        })
    })?;
    let odd_prime_count = blocks.iter().map(|b| b.primes).sum();
    let odd_series = merge_ordered(blocks.iter().map(|b| b.series));
    let odd_tails = merge_ordered(blocks.iter().map(|b| b.tails));

    let sums = alpha_two_part(params.l)? + odd_series;
    let tail = TailBreakdown {
        two_adic: 2.0 * tail_a(2, params.l),
        odd_prime_powers: odd_tails.upper(),
        large_primes: (1.0 / params.n as f64).next_up(),
    };
    let tail_total = inflate(add_up(add_up(tail.two_adic, tail.odd_prime_powers), tail.large_primes));
    let upper_bound = add_up(sums.upper(), tail_total);
    Ok(AlphaResult {
        schema_version: SCHEMA_VERSION,
        params: *params,
        sums,
        tail_total,
        tail,
        upper_bound,
        odd_prime_count,
    })
}
