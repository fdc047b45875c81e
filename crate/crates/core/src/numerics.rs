//! Compensated summation, certified values and deterministic parallel reduction.
//!
//! Every long sum in the crate goes through [`CompensatedSum`]: an
//! error-free two-sum accumulator (Ogita, Rump and Oishi's `Sum2`) that also
//! tracks the sum of absolute values, so that the residual rounding error can
//! be bounded a posteriori by
//!
//! ```text
//! |computed - exact| <= (u |computed| + gamma(n)^2 * sum |t_i|) / (1 - u)
//! ```
//!
//! with `u = 2^-53` and `gamma(n) = n u / (1 - n u)`. The result is a
//! [`CertifiedValue`]: a float together with an absolute error radius.
//!
//! Parallel sums are split by a [`BlockSumPlan`]; each block is summed on its
//! own and the block results are merged in ascending block order, so the
//! outcome does not depend on how many threads ran the blocks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit roundoff of binary64, `2^-53`.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// `gamma(n) = n u / (1 - n u)`, the classical bound on `n` compounded roundings.
pub fn gamma(n: u64) -> f64 {
    let nu = n as f64 * UNIT_ROUNDOFF;
    if nu >= 0.5 {
        return f64::INFINITY;
    }
    (nu / (1.0 - nu)).next_up()
}

/// Error-free transformation: `a + b = s + e` exactly, with `s = fl(a + b)`.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// `a + b` rounded towards `+inf`.
pub fn add_up(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if e > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// `a + b` rounded towards `-inf`.
pub fn add_down(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if e < 0.0 {
        s.next_down()
    } else {
        s
    }
}

/// `a - b` rounded towards `+inf`.
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

/// `a - b` rounded towards `-inf`.
pub fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

/// Inflates a nonnegative bound computed with a handful of roundings so that
/// it stays an upper bound.
pub(crate) fn inflate(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (x * (1.0 + 8.0 * UNIT_ROUNDOFF)).next_up()
    }
}

/// A real number known to lie in `[value - error_radius, value + error_radius]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedValue {
    pub value: f64,
    pub error_radius: f64,
}

impl Default for CertifiedValue {
    fn default() -> Self {
        Self::ZERO
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineKind {
    Add,
    Subtract,
}

impl CertifiedValue {
    pub const ZERO: CertifiedValue = CertifiedValue {
        value: 0.0,
        error_radius: 0.0,
    };

    pub fn new(value: f64, error_radius: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite { index: 0, value });
        }
        if !(error_radius >= 0.0) {
            return Err(Error::param(format!(
                "error radius must be a nonnegative number, got {error_radius}"
            )));
        }
        Ok(Self {
            value,
            error_radius,
        })
    }

    /// A value with no error.
    pub const fn exact(value: f64) -> Self {
        Self {
            value,
            error_radius: 0.0,
        }
    }

    /// Pessimistic lower end of the enclosure.
    pub fn lower(&self) -> f64 {
        sub_down(self.value, self.error_radius)
    }

    /// Pessimistic upper end of the enclosure.
    pub fn upper(&self) -> f64 {
        add_up(self.value, self.error_radius)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }

    /// Widens the radius by a nonnegative amount.
    pub fn widen(self, extra: f64) -> Self {
        debug_assert!(extra >= 0.0);
        Self {
            value: self.value,
            error_radius: add_up(self.error_radius, extra),
        }
    }

    /// Product of two certified values.
    pub fn mul(self, other: CertifiedValue) -> Self {
        let value = self.value * other.value;
        let propagated = self.value.abs() * other.error_radius
            + other.value.abs() * self.error_radius
            + self.error_radius * other.error_radius;
        let rounding = value.abs() * f64::EPSILON;
        Self {
            value,
            error_radius: inflate(propagated + rounding),
        }
    }

    /// Multiplication by an exact scalar.
    pub fn scale(self, k: f64) -> Self {
        self.mul(CertifiedValue::exact(k))
    }

    /// Division by an exact nonzero scalar.
    pub fn div_exact(self, d: f64) -> Self {
        debug_assert!(d != 0.0 && d.is_finite());
        let value = self.value / d;
        Self {
            value,
            error_radius: inflate(self.error_radius / d.abs() + value.abs() * UNIT_ROUNDOFF),
        }
    }
}

/// Adds or subtracts two certified values. The radius is the sum of the input
/// radii plus one rounding allowance for the operation itself.
pub fn certified_combine(a: CertifiedValue, b: CertifiedValue, kind: CombineKind) -> CertifiedValue {
    let (value, err) = match kind {
        CombineKind::Add => two_sum(a.value, b.value),
        CombineKind::Subtract => two_sum(a.value, -b.value),
    };
    let rounding = if err == 0.0 {
        0.0
    } else {
        (value.abs() * f64::EPSILON).max(err.abs())
    };
    CertifiedValue {
        value,
        error_radius: inflate(a.error_radius + b.error_radius + rounding),
    }
}

impl std::ops::Add for CertifiedValue {
    type Output = CertifiedValue;
    fn add(self, rhs: Self) -> Self {
        certified_combine(self, rhs, CombineKind::Add)
    }
}

impl std::ops::Sub for CertifiedValue {
    type Output = CertifiedValue;
    fn sub(self, rhs: Self) -> Self {
        certified_combine(self, rhs, CombineKind::Subtract)
    }
}

/// Running compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
    abs_sum: f64,
    count: u64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.sum, x);
        self.sum = s;
        self.comp += e;
        self.abs_sum += x.abs();
        self.count += 1;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn abs_sum(&self) -> f64 {
        self.abs_sum
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Certifies the sum, assuming each term was exact.
    pub fn certify(&self) -> CertifiedValue {
        self.certify_with_term_error(0.0)
    }

    /// Certifies the sum when every term carries a relative evaluation error
    /// of at most `term_rel_err`.
    pub fn certify_with_term_error(&self, term_rel_err: f64) -> CertifiedValue {
        let value = self.value();
        if self.count == 0 {
            return CertifiedValue::ZERO;
        }
        let g = gamma(self.count);
        // abs_sum is itself a naive sum; bound the exact one from above.
        let abs_bound = self.abs_sum / (1.0 - g);
        let summation = (UNIT_ROUNDOFF * value.abs() + g * g * abs_bound) / (1.0 - UNIT_ROUNDOFF);
        let evaluation = term_rel_err * abs_bound;
        CertifiedValue {
            value,
            error_radius: inflate(summation + evaluation),
        }
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum of a finite sequence of finite terms.
pub fn compensated_sum(terms: &[f64]) -> Result<CertifiedValue> {
    let mut acc = CompensatedSum::new();
    for (index, &t) in terms.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::NonFinite { index, value: t });
        }
        acc.add(t);
    }
    Ok(acc.certify())
}

/// Merges certified values in the given order: the values are summed with
/// compensation and the radii are accumulated upward.
pub fn merge_ordered<I>(parts: I) -> CertifiedValue
where
    I: IntoIterator<Item = CertifiedValue>,
{
    let mut acc = CompensatedSum::new();
    let mut radius = 0.0;
    for part in parts {
        acc.add(part.value);
        radius = add_up(radius, part.error_radius);
    }
    acc.certify().widen(radius)
}

/// Partition of the inclusive integer range `[range_start, range_end]` into
/// consecutive blocks of `block_size` integers (the last one possibly short).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSumPlan {
    pub range_start: u64,
    pub range_end: u64,
    pub block_size: u64,
}

impl BlockSumPlan {
    pub fn new(range_start: u64, range_end: u64, block_size: u64) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::param("block size must be positive"));
        }
        Ok(Self {
            range_start,
            range_end,
            block_size,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.range_end < self.range_start
    }

    pub fn num_blocks(&self) -> u64 {
        if self.is_empty() {
            0
        } else {
            (self.range_end - self.range_start) / self.block_size + 1
        }
    }

    /// Inclusive bounds of block `index`.
    pub fn block(&self, index: u64) -> (u64, u64) {
        let lo = self.range_start + index * self.block_size;
        let hi = lo.saturating_add(self.block_size - 1).min(self.range_end);
        (lo, hi)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        (0..self.num_blocks()).map(move |i| self.block(i))
    }
}

/// Runs `f` on every block of `plan` and returns the results in block order.
///
/// `workers == 0` uses the global rayon pool; `workers == 1` runs inline.
pub fn collect_blocks<T, F>(plan: &BlockSumPlan, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T> + Sync + Send,
{
    let blocks: Vec<(u64, u64)> = plan.blocks().collect();
    collect_ranges(&blocks, workers, f)
}

pub(crate) fn collect_ranges<T, F>(blocks: &[(u64, u64)], workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T> + Sync + Send,
{
    match workers {
        1 => blocks.iter().map(|&(lo, hi)| f(lo, hi)).collect(),
        0 => blocks.par_iter().map(|&(lo, hi)| f(lo, hi)).collect(),
        n => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::resource(format!("cannot start worker pool: {e}")))?;
            pool.install(|| blocks.par_iter().map(|&(lo, hi)| f(lo, hi)).collect())
        }
    }
}

/// Sums `term(n)` over the plan's range. Bit-identical for any worker count.
pub fn deterministic_block_reduce<F>(plan: &BlockSumPlan, workers: usize, term: F) -> Result<CertifiedValue>
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    let parts = collect_blocks(plan, workers, |lo, hi| {
        let mut acc = CompensatedSum::new();
        for n in lo..=hi {
            let t = term(n);
            if !t.is_finite() {
                return Err(Error::NonFinite {
                    index: (n - plan.range_start) as usize,
                    value: t,
                });
            }
            acc.add(t);
        }
        Ok(acc.certify())
    })?;
    Ok(merge_ordered(parts))
}
