//! Empirical means of `s(n)/n` over all, even or odd `n`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arith::sigma;
use crate::error::{Error, Result};
use crate::numerics::{collect_blocks, merge_ordered, BlockSumPlan, CertifiedValue, CompensatedSum, UNIT_ROUNDOFF};
use crate::primes::{factored_range, MAX_SIEVE_LIMIT};
use crate::SCHEMA_VERSION;

const MEANS_BLOCK: u64 = 1 << 20;

/// Relative error of one ratio `s(n)/n` (a single division of exact integers).
const RATIO_REL_ERR: f64 = 2.0 * UNIT_ROUNDOFF;
/// Relative error of one log term, see [`log_ratio`].
const LOG_REL_ERR: f64 = 8.0 * UNIT_ROUNDOFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanClass {
    All,
    Even,
    Odd,
}

impl MeanClass {
    pub const ALL: [MeanClass; 3] = [MeanClass::All, MeanClass::Even, MeanClass::Odd];

    pub fn as_str(self) -> &'static str {
        match self {
            MeanClass::All => "all",
            MeanClass::Even => "even",
            MeanClass::Odd => "odd",
        }
    }

    fn contains(self, n: u64) -> bool {
        match self {
            MeanClass::All => true,
            MeanClass::Even => n % 2 == 0,
            MeanClass::Odd => n % 2 == 1,
        }
    }
}

impl fmt::Display for MeanClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeanClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(MeanClass::All),
            "even" => Ok(MeanClass::Even),
            "odd" => Ok(MeanClass::Odd),
            _ => Err(Error::param(format!("unknown class {s:?} (expected all, even or odd)"))),
        }
    }
}

/// Limit of the arithmetic mean of `s(n)/n` over the class.
pub fn closed_form(class: MeanClass) -> f64 {
    let z2 = PI * PI;
    match class {
        MeanClass::All => z2 / 6.0 - 1.0,
        MeanClass::Even => 5.0 * z2 / 24.0 - 1.0,
        MeanClass::Odd => 3.0 * z2 / 24.0 - 1.0,
    }
}

/// `log(s(n)/n)` for `n > 1` given `sigma(n)`. Near ratio 1 the value goes
/// through `ln_1p` so that the error stays relative to the result.
fn log_ratio(n: u64, sigma_n: u64) -> f64 {
    let s = sigma_n - n;
    let nf = n as f64;
    let x = s as f64 / nf;
    if (0.5..=2.0).contains(&x) {
        ((s as i128 - n as i128) as f64 / nf).ln_1p()
    } else {
        x.ln()
    }
}

struct ClassSums {
    ratios: CertifiedValue,
    logs: CertifiedValue,
    ratio_count: u64,
    log_count: u64,
}

/// One streaming pass over `[1, hi]` accumulating both sums for the class.
fn class_sums(class: MeanClass, hi: u64, workers: usize) -> Result<ClassSums> {
    if hi > MAX_SIEVE_LIMIT {
        return Err(Error::resource(format!("means: cutoff {hi} exceeds the sieve limit {MAX_SIEVE_LIMIT}")));
    }
    let plan = BlockSumPlan::new(1, hi, MEANS_BLOCK)?;
    let odd_only = class == MeanClass::Odd;
    let parts = collect_blocks(&plan, workers, |lo, hi| {
        let mut ratios = CompensatedSum::new();
        let mut logs = CompensatedSum::new();
        let mut ratio_count = 0u64;
        let mut log_count = 0u64;
        for (n, f) in factored_range(lo, hi, odd_only)? {
            if !class.contains(n) {
                continue;
            }
            ratio_count += 1;
            if n == 1 {
                continue;
            }
            let sig = sigma(&f)?;
            ratios.add((sig - n) as f64 / n as f64);
            logs.add(log_ratio(n, sig));
            log_count += 1;
        }
        Ok((
            ratios.certify_with_term_error(RATIO_REL_ERR),
            logs.certify_with_term_error(LOG_REL_ERR),
            ratio_count,
            log_count,
        ))
    })?;
    Ok(ClassSums {
        ratios: merge_ordered(parts.iter().map(|p| p.0)),
        logs: merge_ordered(parts.iter().map(|p| p.1)),
        ratio_count: parts.iter().map(|p| p.2).sum(),
        log_count: parts.iter().map(|p| p.3).sum(),
    })
}

fn mean_of(sum: CertifiedValue, count: u64) -> CertifiedValue {
    sum.div_exact(count as f64)
}

/// Integer cutoff whose class members are exactly the first `terms` members.
fn cutoff_for_terms(class: MeanClass, terms: u64) -> Result<u64> {
    match class {
        MeanClass::All => Ok(terms),
        MeanClass::Even => terms.checked_mul(2).ok_or(Error::Overflow("means cutoff")),
        MeanClass::Odd => terms.checked_mul(2).map(|t| t - 1).ok_or(Error::Overflow("means cutoff")),
    }
}

/// `(1/N) sum_{k=1}^{N} s(a_k)/a_k` where `a_k` is the `k`-th member of the
/// class (`k`, `2k` or `2k - 1`). `s(1)/1` counts as 0.
pub fn arithmetic_mean(class: MeanClass, n: u64) -> Result<CertifiedValue> {
    arithmetic_mean_with(class, n, 0)
}

pub fn arithmetic_mean_with(class: MeanClass, n: u64, workers: usize) -> Result<CertifiedValue> {
    if n < 2 {
        return Err(Error::param(format!("arithmetic_mean needs N >= 2, got {n}")));
    }
    let sums = class_sums(class, cutoff_for_terms(class, n)?, workers)?;
    debug_assert_eq!(sums.ratio_count, n);
    Ok(mean_of(sums.ratios, n))
}

/// Mean of `log(s(m)/m)` over class members `1 < m <= N`.
pub fn log_mean(class: MeanClass, n: u64) -> Result<CertifiedValue> {
    log_mean_with(class, n, 0)
}

pub fn log_mean_with(class: MeanClass, n: u64, workers: usize) -> Result<CertifiedValue> {
    if n < 4 {
        return Err(Error::param(format!("log_mean needs N >= 4, got {n}")));
    }
    let sums = class_sums(class, n, workers)?;
    Ok(mean_of(sums.logs, sums.log_count))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanReport {
    pub class: MeanClass,
    #[serde(rename = "N")]
    pub n: u64,
    /// Mean of `s(m)/m` over the class members `1 < m <= N`, the same
    /// sample as `log_mean`.
    pub arithmetic_mean: CertifiedValue,
    pub log_mean: CertifiedValue,
    pub closed_form_limit: f64,
}

impl MeanReport {
    /// `exp(log_mean)`.
    pub fn geometric_mean(&self) -> f64 {
        self.log_mean.value.exp()
    }

    pub const CSV_HEADER: &'static str = "class,N,arithmetic_mean,log_mean,closed_form,error_radius";

    /// CSV row; `error_radius` is the larger of the two radii.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.12},{:.12},{:.12},{:e}",
            self.class,
            self.n,
            self.arithmetic_mean.value,
            self.log_mean.value,
            self.closed_form_limit,
            self.arithmetic_mean.error_radius.max(self.log_mean.error_radius)
        )
    }
}

/// Both means over the class members `m <= N`, from a single pass.
pub fn mean_report(class: MeanClass, n: u64, workers: usize) -> Result<MeanReport> {
    if n < 4 {
        return Err(Error::param(format!("means need N >= 4, got {n}")));
    }
    let sums = class_sums(class, n, workers)?;
    Ok(MeanReport {
        class,
        n,
        arithmetic_mean: mean_of(sums.ratios, sums.log_count),
        log_mean: mean_of(sums.logs, sums.log_count),
        closed_form_limit: closed_form(class),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeansDocument {
    pub schema_version: u32,
    pub reports: Vec<MeanReport>,
}

impl MeansDocument {
    pub fn new(reports: Vec<MeanReport>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            reports,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(MeanReport::CSV_HEADER);
        out.push('\n');
        for r in &self.reports {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }
}
