//! Segmented sieving: prime streams and fully factored integer ranges.

use crate::arith::{Factorization, PrimePowers};
use crate::error::{Error, Result};

/// Largest supported sieve bound.
pub const MAX_SIEVE_LIMIT: u64 = 10_000_000_000;

pub const DEFAULT_SEGMENT_SIZE: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SieveConfig {
    /// Integers covered by one segment.
    pub segment_size: u64,
    /// Upper limit on the memory a materialized prime list may take.
    pub max_output_bytes: u64,
}

impl Default for SieveConfig {
    fn default() -> Self {
        Self {
            segment_size: DEFAULT_SEGMENT_SIZE,
            max_output_bytes: 1 << 31,
        }
    }
}

impl SieveConfig {
    pub fn with_segment_size(segment_size: u64) -> Self {
        Self {
            segment_size,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.segment_size == 0 {
            return Err(Error::param("segment size must be positive"));
        }
        Ok(())
    }
}

/// All primes `<= limit` by a plain sieve of Eratosthenes.
pub fn small_primes(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn check_range(lo: u64, hi: u64, min_lo: u64) -> Result<()> {
    if lo < min_lo || lo > hi {
        return Err(Error::param(format!(
            "invalid range [{lo}, {hi}]: need {min_lo} <= lo <= hi"
        )));
    }
    if hi > MAX_SIEVE_LIMIT {
        return Err(Error::param(format!(
            "upper bound {hi} exceeds the supported limit {MAX_SIEVE_LIMIT}"
        )));
    }
    Ok(())
}

/// Rosser-Schoenfeld style upper estimate of pi(x), good enough for sizing.
fn prime_count_upper(x: u64) -> u64 {
    if x < 17 {
        return 7;
    }
    let xf = x as f64;
    (1.26 * xf / xf.ln()).ceil() as u64
}

/// Base primes for sieving up to `hi`.
pub fn sieving_primes(hi: u64) -> Vec<u64> {
    small_primes(hi.isqrt())
}

/// Primes in one inclusive window, given base primes covering `sqrt(hi)`.
pub fn primes_in_window(lo: u64, hi: u64, base: &[u64]) -> Vec<u64> {
    let mut out = Vec::new();
    sieve_window(lo.max(2), hi, base, |p| out.push(p));
    out
}

fn sieve_window(lo: u64, hi: u64, base: &[u64], mut emit: impl FnMut(u64)) {
    if lo > hi {
        return;
    }
    let len = (hi - lo + 1) as usize;
    let mut composite = vec![false; len];
    for &p in base {
        if p * p > hi {
            break;
        }
        let start = (p * p).max(lo.div_ceil(p) * p);
        let mut m = start;
        while m <= hi {
            composite[(m - lo) as usize] = true;
            m += p;
        }
    }
    for (i, &c) in composite.iter().enumerate() {
        let n = lo + i as u64;
        if !c && n >= 2 {
            emit(n);
        }
    }
}

/// Streams every prime in `[lo, hi]` in ascending order, one segment at a time.
pub fn for_each_prime(lo: u64, hi: u64, config: &SieveConfig, mut f: impl FnMut(u64)) -> Result<()> {
    check_range(lo, hi, 2)?;
    config.validate()?;
    let base = sieving_primes(hi);
    let mut s = lo;
    loop {
        let e = s.saturating_add(config.segment_size - 1).min(hi);
        sieve_window(s, e, &base, &mut f);
        if e == hi {
            return Ok(());
        }
        s = e + 1;
    }
}

/// The primes in `[lo, hi]`, `2 <= lo <= hi <= 10^10`.
pub fn primes_in_range(lo: u64, hi: u64) -> Result<Vec<u64>> {
    primes_in_range_with(lo, hi, &SieveConfig::default())
}

pub fn primes_in_range_with(lo: u64, hi: u64, config: &SieveConfig) -> Result<Vec<u64>> {
    check_range(lo, hi, 2)?;
    config.validate()?;
    let estimate = prime_count_upper(hi);
    let bytes = estimate.saturating_mul(8);
    if bytes > config.max_output_bytes {
        let per_chunk = (config.max_output_bytes / 8).max(1);
        return Err(Error::resource(format!(
            "about {estimate} primes up to {hi} would need {bytes} bytes (limit {}); \
             stream them with for_each_prime or split the range into windows of at most ~{} integers",
            config.max_output_bytes,
            per_chunk as f64 * (hi as f64).ln()
        )));
    }
    let mut out = Vec::new();
    for_each_prime(lo, hi, config, |p| out.push(p))?;
    Ok(out)
}

const NIL: u32 = u32::MAX;

/// Factorizations of one segment, built by dividing out every base prime.
struct FactoredSegment {
    start: u64,
    stride: u64,
    rem: Vec<u64>,
    head: Vec<u32>,
    tail: Vec<u32>,
    pool: Vec<(u32, u8, u32)>,
}

impl FactoredSegment {
    fn new() -> Self {
        Self {
            start: 0,
            stride: 1,
            rem: Vec::new(),
            head: Vec::new(),
            tail: Vec::new(),
            pool: Vec::new(),
        }
    }

    #[inline]
    fn push(&mut self, idx: usize, p: u64, m: u32) {
        let slot = self.pool.len() as u32;
        self.pool.push((p as u32, m as u8, NIL));
        if self.head[idx] == NIL {
            self.head[idx] = slot;
        } else {
            let t = self.tail[idx] as usize;
            self.pool[t].2 = slot;
        }
        self.tail[idx] = slot;
    }

    /// Fills the segment with `start, start + stride, ...` up to `end`.
    fn fill(&mut self, start: u64, end: u64, stride: u64, base: &[u64]) {
        let len = ((end - start) / stride + 1) as usize;
        self.start = start;
        self.stride = stride;
        self.rem.clear();
        self.rem.extend((0..len as u64).map(|i| start + i * stride));
        self.head.clear();
        self.head.resize(len, NIL);
        self.tail.clear();
        self.tail.resize(len, NIL);
        self.pool.clear();
        self.pool.reserve(len * 3);

        for &p in base {
            if p * p > end {
                break;
            }
            if p == 2 {
                if stride == 2 {
                    continue;
                }
                let first = start + (start & 1);
                let mut n = first;
                while n <= end {
                    let idx = (n - start) as usize;
                    let m = self.rem[idx].trailing_zeros();
                    self.rem[idx] >>= m;
                    self.push(idx, 2, m);
                    n += 2;
                }
                continue;
            }
            let mut first = start.div_ceil(p) * p;
            if stride == 2 && first % 2 == 0 {
                first += p;
            }
            let step = p * stride;
            let mut n = first;
            while n <= end {
                let idx = ((n - start) / stride) as usize;
                let mut r = self.rem[idx] / p;
                let mut m = 1;
                while r % p == 0 {
                    r /= p;
                    m += 1;
                }
                self.rem[idx] = r;
                self.push(idx, p, m);
                n += step;
            }
        }
    }

    fn len(&self) -> usize {
        self.rem.len()
    }

    fn factorization(&self, idx: usize) -> (u64, Factorization) {
        let n = self.start + idx as u64 * self.stride;
        let mut entries = PrimePowers::new();
        let mut slot = self.head[idx];
        while slot != NIL {
            let (p, m, next) = self.pool[slot as usize];
            entries.push((p as u64, m as u32));
            slot = next;
        }
        if self.rem[idx] > 1 {
            entries.push((self.rem[idx], 1));
        }
        (n, Factorization::from_parts_unchecked(n, entries))
    }
}

/// Ordered stream of `(n, factorization of n)` over `[lo, hi]`, optionally odd `n` only.
pub struct FactoredRangeStream {
    lo: u64,
    hi: u64,
    odd_only: bool,
    segment_size: u64,
    base: Vec<u64>,
    next_start: Option<u64>,
    segment: FactoredSegment,
    pos: usize,
}

impl FactoredRangeStream {
    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    pub fn odd_only(&self) -> bool {
        self.odd_only
    }

    pub fn segment_size(&self) -> u64 {
        self.segment_size
    }

    fn advance_segment(&mut self) -> bool {
        let Some(s) = self.next_start else {
            return false;
        };
        let stride = if self.odd_only { 2 } else { 1 };
        let span = self.segment_size.max(stride);
        let mut e = s.saturating_add(span - 1).min(self.hi);
        if self.odd_only && e % 2 == 0 {
            e -= 1;
        }
        if e < s {
            self.next_start = None;
            return false;
        }
        self.segment.fill(s, e, stride, &self.base);
        self.pos = 0;
        self.next_start = match e.checked_add(stride) {
            Some(n) if n <= self.hi => Some(n),
            _ => None,
        };
        true
    }
}

impl Iterator for FactoredRangeStream {
    type Item = (u64, Factorization);

    fn next(&mut self) -> Option<Self::Item> {
        while self.pos >= self.segment.len() {
            if !self.advance_segment() {
                return None;
            }
        }
        let item = self.segment.factorization(self.pos);
        self.pos += 1;
        Some(item)
    }
}

/// Streams complete factorizations of every `n` (or every odd `n`) in `[lo, hi]`.
pub fn factored_range(lo: u64, hi: u64, odd_only: bool) -> Result<FactoredRangeStream> {
    factored_range_with(lo, hi, odd_only, &SieveConfig::default())
}

pub fn factored_range_with(lo: u64, hi: u64, odd_only: bool, config: &SieveConfig) -> Result<FactoredRangeStream> {
    check_range(lo, hi, 1)?;
    config.validate()?;
    let first = if odd_only && lo % 2 == 0 { lo + 1 } else { lo };
    Ok(FactoredRangeStream {
        lo,
        hi,
        odd_only,
        segment_size: config.segment_size,
        base: sieving_primes(hi),
        next_start: (first <= hi).then_some(first),
        segment: FactoredSegment::new(),
        pos: 0,
    })
}
