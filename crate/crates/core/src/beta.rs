//! Certified lower bound for `beta = sum_j (1/j) (2 beta_j(2) - 1) prod_{p odd} beta_j(p)`.
//!
//! With `g_j(n) = (1/n) (n / sigma(n))^j` and `h_j` the multiplicative function
//! with `h_j(p^m) = (1 + 1/(p sigma(p^(m-1))))^j - 1`, the odd product expands
//! as `sum_{n odd} beta_j(n)` where `beta_j(n) = (-1)^nu(n) g_j(n) h_j(n)`.
//! Each `j` summand is split into
//!
//! * the main term `(1/j) (2 beta_j(2) - 1) sum_{n odd, n <= N_j} beta_j(n)`,
//! * the correction over the finite set `S_{j,e} = { n : h_j(n) > n^-e }`
//!   restricted to `n > N_j`,
//! * a tail over the remaining `n > N_j`, where `|beta_j(n)| <= g_j(n) n^-e`.
//!
//! `S_{j,e}` is enumerated from the finite set of prime powers
//! `T_j^{e,c} = { p^m : h_j(p^m) >= 1 / (c p^(me)) }` with `c = M_{j,e}`, the
//! maximum of `h_j(n) n^e`.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::arith::{sigma_prime_power, Factorization};
use crate::checkpoint::{config_hash, BlockRecord, CheckpointKey, CheckpointStore, ChunkRecord};
use crate::error::{Error, Result};
use crate::numerics::{
    add_down, add_up, collect_ranges, inflate, merge_ordered, sub_down, BlockSumPlan, CertifiedValue, CompensatedSum, UNIT_ROUNDOFF,
};
use crate::primes::{factored_range, for_each_prime, SieveConfig, MAX_SIEVE_LIMIT};
use crate::SCHEMA_VERSION;

/// Default 2-adic truncation depth.
pub const DEFAULT_K2: u32 = 64;
/// Default integers per main-term block.
pub const DEFAULT_BLOCK_SIZE: u64 = 1_000_000;
/// Default blocks per checkpoint chunk.
pub const DEFAULT_BLOCKS_PER_CHUNK: u64 = 10;
/// Default cap on search nodes while enumerating `S`.
pub const DEFAULT_MAX_S_NODES: u64 = 20_000_000_000;

/// Relative slack on the set boundaries of `T` and `S`. Both sets are
/// enumerated as (tiny) supersets, which keeps every bound valid.
const SET_MARGIN: f64 = 1e-12;
/// Largest prime power scanned for `T`.
const MAX_T_CUTOFF: f64 = 1e10;

fn check_j(j: u32) -> Result<()> {
    if j == 0 || j > 1000 {
        return Err(Error::param(format!("j must lie in 1..=1000, got {j}")));
    }
    Ok(())
}

fn check_e_open(e: f64) -> Result<()> {
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::param(format!("e must lie in (0, 1), got {e}")));
    }
    Ok(())
}

/// `(g_j(p^m), h_j(p^m))` in floating point. Needs `sigma(p^m)` within `u64`.
fn component(j: u32, p: u64, m: u32) -> Result<(f64, f64)> {
    let q = p.checked_pow(m).ok_or(Error::Overflow("p^m"))?;
    let sig = sigma_prime_power(p, m)?;
    let sig_prev = sigma_prime_power(p, m - 1)?;
    Ok(component_from(j, p, q, sig, sig_prev))
}

#[inline]
fn component_from(j: u32, p: u64, q: u64, sig: u64, sig_prev: u64) -> (f64, f64) {
    let qf = q as f64;
    let g = (qf / sig as f64).powi(j as i32) / qf;
    let x = 1.0 / (p as f64 * sig_prev as f64);
    let h = (j as f64 * x.ln_1p()).exp_m1();
    (g, h)
}

/// Fast `(g, h)` for factorizations coming out of the sieve (`n <= 10^10`).
#[inline]
fn component_fast(j: u32, p: u64, m: u32) -> (f64, f64) {
    let mut q = 1u64;
    let mut sig = 1u64;
    let mut sig_prev = 1u64;
    for _ in 0..m {
        sig_prev = sig;
        q *= p;
        sig += q;
    }
    component_from(j, p, q, sig, sig_prev)
}

/// `g_j(n) = (1/n) (n / sigma(n))^j`.
pub fn g(j: u32, f: &Factorization) -> Result<f64> {
    check_j(j)?;
    f.entries().iter().try_fold(1.0, |acc, &(p, m)| Ok(acc * component(j, p, m)?.0))
}

/// `h_j(n)`, multiplicative with `h_j(1) = 1`.
pub fn h(j: u32, f: &Factorization) -> Result<f64> {
    check_j(j)?;
    f.entries().iter().try_fold(1.0, |acc, &(p, m)| Ok(acc * component(j, p, m)?.1))
}

/// `h_j(p^m)` as the binomial sum `sum_{k=1}^{j} C(j, k) / (p sigma(p^(m-1)))^k`.
pub fn h_prime_power_binomial(j: u32, p: u64, m: u32) -> Result<f64> {
    let x = 1.0 / (p as f64 * sigma_prime_power(p, m - 1)? as f64);
    let mut acc = CompensatedSum::new();
    let mut binom = 1.0;
    let mut xk = 1.0;
    for k in 1..=j {
        binom = binom * (j - k + 1) as f64 / k as f64;
        xk *= x;
        acc.add(binom * xk);
    }
    Ok(acc.value())
}

/// `beta_j(n) = (-1)^nu(n) g_j(n) h_j(n)` for odd `n`.
pub fn beta_signed(j: u32, f: &Factorization) -> Result<f64> {
    check_j(j)?;
    if f.n() % 2 == 0 {
        return Err(Error::param("beta_signed is defined for odd n"));
    }
    f.entries().iter().try_fold(1.0, |acc, &(p, m)| {
        let (g, h) = component(j, p, m)?;
        Ok(-acc * g * h)
    })
}

#[inline]
fn beta_signed_fast(j: u32, odd_entries: &[(u64, u32)]) -> f64 {
    let mut acc = 1.0;
    for &(p, m) in odd_entries {
        let (g, h) = component_fast(j, p, m);
        acc = -acc * g * h;
    }
    acc
}

/// Relative evaluation error of one `beta_signed_fast` term: at most nine
/// odd prime factors below `10^10`, each with `O(j)` roundings.
fn term_rel_err(j: u32) -> f64 {
    (10.0 * (j as f64 + 24.0) + 16.0) * UNIT_ROUNDOFF
}

/// `g_j(2^k)` for `k >= 1`.
fn g_two(j: u32, k: u32) -> f64 {
    let q = 2f64.powi(k as i32);
    (q / (2.0 * q - 1.0)).powi(j as i32) / q
}

/// `2 beta_j(2) - 1 = sum_{m >= 1} g_j(2^m)`, truncated at `K2` with the tail
/// `(2/3)^j 2^(1 - K2)` folded into the radius.
pub fn two_beta2_minus_one(j: u32, k2: u32) -> Result<CertifiedValue> {
    check_j(j)?;
    if !(8..=1000).contains(&k2) {
        return Err(Error::param(format!("K2 must lie in 8..=1000, got {k2}")));
    }
    let mut acc = CompensatedSum::new();
    for k in 1..=k2 {
        acc.add(g_two(j, k));
    }
    let tail = (2.0f64 / 3.0).powi(j as i32) * 2f64.powi(1 - k2 as i32);
    Ok(acc.certify_with_term_error((j as f64 + 4.0) * UNIT_ROUNDOFF).widen(inflate(tail)))
}

/// `beta_j(p) = sum_{m >= 0} beta_j(p^m)` truncated at `depth`, with the tail
/// `p^-depth / (p - 1)` folded into the radius.
pub fn beta_prime(j: u32, p: u64, depth: u32) -> Result<CertifiedValue> {
    check_j(j)?;
    if depth < 4 {
        return Err(Error::param(format!("beta_prime depth must be >= 4, got {depth}")));
    }
    if p < 3 || !crate::arith::is_prime(p) {
        return Err(Error::param(format!("beta_prime needs an odd prime, got {p}")));
    }
    let pf = p as f64;
    let mut acc = CompensatedSum::new();
    acc.add(1.0);
    let mut inv = 1.0;
    let mut m = 1;
    while m <= depth {
        inv /= pf;
        if inv < f64::MIN_POSITIVE {
            break;
        }
        let t = match component(j, p, m) {
            Ok((g, h)) => g * h,
            // p^m past u64: the term is below p^-m and lands in the tail
            Err(Error::Overflow(_)) => break,
            Err(e) => return Err(e),
        };
        acc.add(-t);
        m += 1;
    }
    let tail = inv * pf / (pf - 1.0);
    Ok(acc.certify_with_term_error(term_rel_err(j)).widen(inflate(tail)))
}

/// Main-term error formula `(2/3)^j / (2 j e N^e)`.
pub fn error_term(j: u32, e: f64, n: u64) -> f64 {
    (2.0f64 / 3.0).powi(j as i32) / (2.0 * j as f64 * e * (n as f64).powf(e))
}

/// Rigorous tail bound for `(1/j) (2 beta_j(2) - 1) sum_{n odd > N, n not in S} beta_j(n)`:
/// `two_upper / (2 j e (N - 1)^e)`, rounded up.
pub fn rigorous_tail(j: u32, e: f64, n: u64, two_upper: f64) -> f64 {
    let d = 2.0 * j as f64 * e * ((n - 1) as f64).powf(e);
    inflate(inflate(two_upper / d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimePowerEntry {
    pub p: u64,
    pub m: u32,
    pub h_value: f64,
    pub g_value: f64,
}

impl PrimePowerEntry {
    /// `h_j(p^m) p^(me)`.
    pub fn weight(&self, e: f64) -> f64 {
        self.h_value * (self.p as f64).powf(self.m as f64 * e)
    }
}

/// The prime powers `p^m` with `h_j(p^m) >= 1 / (c p^(me))`, ordered by `p` then `m`.
pub fn t_set(j: u32, e: f64, c: f64, odd_only: bool) -> Result<Vec<PrimePowerEntry>> {
    check_j(j)?;
    check_e_open(e)?;
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::param(format!("t_set needs c >= 1, got {c}")));
    }
    let jf = j as f64;
    let cutoff = (2.0 * jf * c).powf(1.0 / (1.0 - e));
    if !(cutoff <= MAX_T_CUTOFF) {
        return Err(Error::resource(format!(
            "t_set cutoff (2jc)^(1/(1-e)) = {cutoff:.3e} exceeds {MAX_T_CUTOFF:e}"
        )));
    }
    let x = cutoff.floor() as u64;
    let threshold = (1.0 - SET_MARGIN) / c;
    let mut out = Vec::new();
    let mut failure = None;
    let lo = if odd_only { 3 } else { 2 };
    if x >= lo {
        for_each_prime(lo, x, &SieveConfig::default(), |p| {
            if failure.is_some() {
                return;
            }
            let mut m = 1;
            let mut q = p;
            loop {
                match component(j, p, m) {
                    Ok((g_value, h_value)) => {
                        // soundness of the cutoff: h_j(p^m) <= 2j/p^m once p^m >= 2j
                        if q as f64 >= 2.0 * jf && h_value > 2.0 * jf / q as f64 {
                            failure = Some(Error::param(format!("h bound violated at {p}^{m}")));
                            return;
                        }
                        let entry = PrimePowerEntry { p, m, h_value, g_value };
                        if entry.weight(e) >= threshold {
                            out.push(entry);
                        }
                    }
                    Err(err) => {
                        failure = Some(err);
                        return;
                    }
                }
                match q.checked_mul(p) {
                    Some(next) if next <= x => {
                        q = next;
                        m += 1;
                    }
                    _ => break,
                }
            }
        })?;
    }
    match failure {
        Some(err) => Err(err),
        None => Ok(out),
    }
}

/// Groups entries by prime: `(prime, entries, max weight)`.
fn group_by_prime(entries: &[PrimePowerEntry], e: f64) -> Vec<(u64, Vec<(PrimePowerEntry, f64)>, f64)> {
    let mut out: Vec<(u64, Vec<(PrimePowerEntry, f64)>, f64)> = Vec::new();
    for entry in entries {
        let w = entry.weight(e);
        match out.last_mut() {
            Some((p, list, mx)) if *p == entry.p => {
                list.push((*entry, w));
                *mx = mx.max(w);
            }
            _ => out.push((entry.p, vec![(*entry, w)], w)),
        }
    }
    out
}

/// `M_{j,e} = max_n h_j(n) n^e`, as the product over the primes of
/// `T_j^{e,1}` of `max(1, max_m h_j(p^m) p^(me))`, rounded up.
pub fn m_const(j: u32, e: f64, odd_only: bool) -> Result<f64> {
    let t = t_set(j, e, 1.0, odd_only)?;
    let mut m = 1.0;
    for (_, _, mx) in group_by_prime(&t, e) {
        if mx > 1.0 {
            m = inflate(m * mx);
        }
    }
    Ok(m)
}

/// One element of `S_{j,e}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SElement {
    /// `u128::MAX` when the product overflows (such `n` exceed every cutoff).
    pub n: u128,
    /// `h_j(n) n^e`, greater than 1.
    pub weight: f64,
    /// `beta_j(n)`.
    pub beta: f64,
    /// Number of prime factors, for the error budget.
    pub nu: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SSetStats {
    pub count: u64,
    pub visited_nodes: u64,
    pub t_size: usize,
    pub m_const: f64,
    pub max_n: u128,
}

struct SSearch<'a, F> {
    primes: Vec<Vec<(PrimePowerEntry, f64)>>,
    suffix: Vec<f64>,
    suffix_max: Vec<f64>,
    threshold: f64,
    max_nodes: u64,
    stats: SSetStats,
    visit: &'a mut F,
}

impl<F: FnMut(&SElement)> SSearch<'_, F> {
    fn run(&mut self, start: usize, n: u128, weight: f64, beta: f64, nu: u32) -> Result<()> {
        for i in start..self.primes.len() {
            // best any extension through primes i.. can reach
            if weight * self.suffix[i] * self.suffix_max[i].min(1.0) <= self.threshold {
                break;
            }
            for k in 0..self.primes[i].len() {
                let (entry, w) = self.primes[i][k];
                self.stats.visited_nodes += 1;
                if self.stats.visited_nodes > self.max_nodes {
                    return Err(Error::resource(format!(
                        "S enumeration exceeded {} search nodes after {} elements",
                        self.max_nodes, self.stats.count
                    )));
                }
                let q = (entry.p as u128).pow(entry.m);
                let n2 = n.checked_mul(q).unwrap_or(u128::MAX);
                let w2 = weight * w;
                let b2 = -beta * entry.g_value * entry.h_value;
                if w2 > self.threshold {
                    self.stats.count += 1;
                    self.stats.max_n = self.stats.max_n.max(n2);
                    (self.visit)(&SElement {
                        n: n2,
                        weight: w2,
                        beta: b2,
                        nu: nu + 1,
                    });
                }
                if i + 1 < self.primes.len() {
                    self.run(i + 1, n2, w2, b2, nu + 1)?;
                }
            }
        }
        Ok(())
    }
}

/// Streams every element of `S_{j,e}` (odd elements only when `odd_only`)
/// to `visit`, in depth-first order. For `j = 1, e = 1` the set is empty.
pub fn s_set_visit<F: FnMut(&SElement)>(j: u32, e: f64, odd_only: bool, max_nodes: u64, mut visit: F) -> Result<SSetStats> {
    check_j(j)?;
    if e == 1.0 && j == 1 {
        // h_1(p^m) p^m = p^m / (p sigma(p^(m-1))) <= 1, so h_1(n) n <= 1 throughout
        return Ok(SSetStats {
            count: 0,
            visited_nodes: 0,
            t_size: 0,
            m_const: 1.0,
            max_n: 0,
        });
    }
    check_e_open(e)?;
    let m = m_const(j, e, odd_only)?;
    let t = t_set(j, e, m, odd_only)?;
    let groups = group_by_prime(&t, e);
    let len = groups.len();
    let mut suffix = vec![1.0; len + 1];
    let mut suffix_max = vec![0.0f64; len + 1];
    for i in (0..len).rev() {
        suffix[i] = inflate(suffix[i + 1] * groups[i].2.max(1.0));
        suffix_max[i] = suffix_max[i + 1].max(groups[i].2);
    }
    let mut search = SSearch {
        primes: groups.into_iter().map(|g| g.1).collect(),
        suffix,
        suffix_max,
        threshold: 1.0 - SET_MARGIN,
        max_nodes,
        stats: SSetStats {
            count: 0,
            visited_nodes: 0,
            t_size: t.len(),
            m_const: m,
            max_n: 0,
        },
        visit: &mut visit,
    };
    search.run(0, 1, 1.0, 1.0, 0)?;
    Ok(search.stats)
}

/// Materialized `S_{j,e}`, sorted by `n`. More than `cap` elements is a
/// resource error reporting how many were found.
pub fn s_set(j: u32, e: f64, odd_only: bool, cap: usize) -> Result<Vec<SElement>> {
    let mut out = Vec::new();
    let mut over = false;
    let stats = s_set_visit(j, e, odd_only, DEFAULT_MAX_S_NODES, |el| {
        if out.len() < cap {
            out.push(*el);
        } else {
            over = true;
        }
    })?;
    if over {
        return Err(Error::resource(format!(
            "S has {} elements, more than the cap of {cap}",
            stats.count
        )));
    }
    out.sort_by_key(|el| el.n);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MainTermMode {
    /// `(2 beta_j(2) - 1)` times the odd sum up to `N_j`.
    #[default]
    Factorized,
    /// Literal sum of `beta_j^*(n)` over even `n <= N_j`; needs the
    /// mixed-region bound.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaJConfig {
    pub j: u32,
    #[serde(rename = "N_j")]
    pub n_j: u64,
    pub e: f64,
    #[serde(default = "default_k2")]
    pub k2: u32,
    #[serde(default)]
    pub mode: MainTermMode,
}

fn default_k2() -> u32 {
    DEFAULT_K2
}

impl BetaJConfig {
    pub fn new(j: u32, n_j: u64, e: f64) -> Result<Self> {
        let c = Self {
            j,
            n_j,
            e,
            k2: DEFAULT_K2,
            mode: MainTermMode::Factorized,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_j(self.j)?;
        if self.n_j < 2 || self.n_j % 2 != 0 {
            return Err(Error::param(format!("N_j must be an even integer > 1, got {}", self.n_j)));
        }
        if self.n_j > MAX_SIEVE_LIMIT {
            return Err(Error::param(format!("N_j = {} exceeds the sieve limit {MAX_SIEVE_LIMIT}", self.n_j)));
        }
        if self.e == 1.0 {
            if self.j != 1 {
                return Err(Error::param(format!("e = 1 is only allowed for j = 1, got j = {}", self.j)));
            }
        } else {
            check_e_open(self.e)?;
        }
        if !(8..=1000).contains(&self.k2) {
            return Err(Error::param(format!("K2 must lie in 8..=1000, got {}", self.k2)));
        }
        Ok(())
    }
}

/// Parallelism, checkpointing and resource options for beta runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaOptions {
    /// 0 = all cores.
    pub workers: usize,
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop with [`Error::Interrupted`] after this many newly computed chunks.
    pub stop_after_chunks: Option<usize>,
    pub block_size: u64,
    pub blocks_per_chunk: u64,
    pub max_s_nodes: u64,
}

impl Default for BetaOptions {
    fn default() -> Self {
        Self {
            workers: 0,
            checkpoint_dir: None,
            stop_after_chunks: None,
            block_size: DEFAULT_BLOCK_SIZE,
            blocks_per_chunk: DEFAULT_BLOCKS_PER_CHUNK,
            max_s_nodes: DEFAULT_MAX_S_NODES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MainTerm {
    /// `(1/j)` times the product, or the direct even sum.
    pub value: CertifiedValue,
    pub two_adic: CertifiedValue,
    /// `sum_{n odd <= N_j} beta_j(n)` (factorized mode only).
    pub odd_sum: Option<CertifiedValue>,
    pub chunks_resumed: usize,
    pub chunks_computed: usize,
}

fn block_sum(j: u32, mode: MainTermMode, g2: &[f64], lo: u64, hi: u64) -> Result<CertifiedValue> {
    let mut acc = CompensatedSum::new();
    match mode {
        MainTermMode::Factorized => {
            for (_, f) in factored_range(lo, hi, true)? {
                acc.add(beta_signed_fast(j, f.entries()));
            }
        }
        MainTermMode::Direct => {
            for (n, f) in factored_range(lo, hi, false)? {
                if n % 2 == 0 {
                    let k = f.two_adic_valuation() as usize;
                    acc.add(g2[k] * beta_signed_fast(j, f.odd_entries()));
                }
            }
        }
    }
    Ok(acc.certify_with_term_error(term_rel_err(j) + 4.0 * UNIT_ROUNDOFF))
}

#[derive(Serialize)]
struct MainTermHashInput {
    schema_version: u32,
    j: u32,
    n_j: u64,
    block_size: u64,
    blocks_per_chunk: u64,
    mode: MainTermMode,
}

/// Main term of the `j` summand, optionally checkpointed per chunk of blocks.
pub fn main_term(config: &BetaJConfig, opts: &BetaOptions) -> Result<MainTerm> {
    config.validate()?;
    if opts.blocks_per_chunk == 0 {
        return Err(Error::param("blocks_per_chunk must be positive"));
    }
    let j = config.j;
    let two = two_beta2_minus_one(j, config.k2)?;
    let g2: Vec<f64> = (0..64).map(|k| if k == 0 { 0.0 } else { g_two(j, k) }).collect();
    let plan = BlockSumPlan::new(1, config.n_j, opts.block_size)?;
    let nblocks = plan.num_blocks();
    let nchunks = nblocks.div_ceil(opts.blocks_per_chunk);

    let store = opts.checkpoint_dir.as_ref().map(CheckpointStore::open).transpose()?;
    let key = CheckpointKey {
        verb: "beta-main".into(),
        j,
        config_hash: config_hash(&MainTermHashInput {
            schema_version: SCHEMA_VERSION,
            j,
            n_j: config.n_j,
            block_size: opts.block_size,
            blocks_per_chunk: opts.blocks_per_chunk,
            mode: config.mode,
        })?,
    };

    let mut values = Vec::with_capacity(nblocks as usize);
    let mut resumed = 0usize;
    let mut computed = 0usize;
    let mut verified = false;
    for chunk in 0..nchunks {
        let first = chunk * opts.blocks_per_chunk;
        let last = (first + opts.blocks_per_chunk).min(nblocks) - 1;
        let ranges: Vec<(u64, u64)> = (first..=last).map(|b| plan.block(b)).collect();
        if let Some(store) = &store {
            if let Some(rec) = store.load(&key, chunk, first, last)? {
                let loaded: Vec<CertifiedValue> = rec.blocks.iter().map(|b| b.value()).collect::<Result<_>>()?;
                for (b, &(lo, hi)) in rec.blocks.iter().zip(&ranges) {
                    if b.lo != lo || b.hi != hi {
                        return Err(Error::Checkpoint(format!("chunk {chunk} block bounds do not match the plan")));
                    }
                }
                if !verified {
                    let (lo, hi) = ranges[0];
                    let again = block_sum(j, config.mode, &g2, lo, hi)?;
                    if again.value.to_bits() != loaded[0].value.to_bits()
                        || again.error_radius.to_bits() != loaded[0].error_radius.to_bits()
                    {
                        return Err(Error::Checkpoint(format!(
                            "chunk {chunk} failed verification: stored block differs from recomputation"
                        )));
                    }
                    verified = true;
                }
                values.extend(loaded);
                resumed += 1;
                continue;
            }
        }
        if opts.stop_after_chunks.is_some_and(|limit| computed >= limit) {
            return Err(Error::Interrupted {
                completed_chunks: resumed + computed,
            });
        }
        let sums = collect_ranges(&ranges, opts.workers, |lo, hi| block_sum(j, config.mode, &g2, lo, hi))?;
        if let Some(store) = &store {
            let rec = ChunkRecord {
                schema_version: SCHEMA_VERSION,
                verb: key.verb.clone(),
                j,
                config_hash: key.config_hash.clone(),
                chunk_index: chunk,
                blocks: (first..=last)
                    .zip(&ranges)
                    .zip(&sums)
                    .map(|((b, &(lo, hi)), &v)| BlockRecord::new(b, lo, hi, v))
                    .collect(),
            };
            store.save(&key, &rec)?;
        }
        values.extend(sums);
        computed += 1;
    }
    let total = merge_ordered(values);
    let (value, odd_sum) = match config.mode {
        MainTermMode::Factorized => (two.mul(total).div_exact(j as f64), Some(total)),
        MainTermMode::Direct => {
            // the 2-adic truncation does not enter the direct sum
            (total.div_exact(j as f64), None)
        }
    };
    Ok(MainTerm {
        value,
        two_adic: two,
        odd_sum,
        chunks_resumed: resumed,
        chunks_computed: computed,
    })
}

/// `(1/j) sum_{n even <= N} beta_j^*(n)` by plain iteration. For tests and
/// small cross-checks.
pub fn main_term_direct(j: u32, n_max: u64) -> Result<f64> {
    check_j(j)?;
    let mut acc = CompensatedSum::new();
    for (n, f) in factored_range(1, n_max.max(1), false)? {
        if n % 2 == 0 {
            let k = f.two_adic_valuation();
            acc.add(g_two(j, k) * beta_signed_fast(j, f.odd_entries()));
        }
    }
    Ok(acc.value() / j as f64)
}

/// Bound on the part of the factorized product not covered by the direct
/// even sum: `(1/j) (2/3)^j (2M/N) sum_{n odd <= N} n^-e`.
pub fn mixed_region_bound(j: u32, e: f64, n: u64, m: f64) -> f64 {
    let nf = n as f64;
    let odd_power_sum = if e >= 1.0 {
        1.0 + nf.ln() / 2.0
    } else {
        1.0 + (nf.powf(1.0 - e) - 1.0) / (2.0 * (1.0 - e))
    };
    inflate(inflate((2.0f64 / 3.0).powi(j as i32) * 2.0 * m / nf * odd_power_sum / j as f64))
}

/// Correction over the elements of `S` above `N_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SCorrection {
    /// `(1/j) (2 beta_j(2) - 1) sum_{n in S, n > N_j} beta_j(n)`.
    pub value: CertifiedValue,
    pub stats: SSetStats,
    /// Elements of `S` above `N_j`.
    pub above_cutoff: u64,
}

/// `S` correction from a materialized set.
pub fn s_correction(config: &BetaJConfig, elements: &[SElement], two: CertifiedValue) -> Result<CertifiedValue> {
    config.validate()?;
    let mut acc = CompensatedSum::new();
    for el in elements {
        if el.n > config.n_j as u128 {
            acc.add(el.beta);
        }
    }
    let sum = acc.certify_with_term_error(s_term_rel_err(config.j, elements.iter().map(|e| e.nu).max().unwrap_or(0)));
    Ok(two.mul(sum).div_exact(config.j as f64))
}

fn s_term_rel_err(j: u32, nu: u32) -> f64 {
    ((nu as f64 + 1.0) * (j as f64 + 24.0) + 16.0) * UNIT_ROUNDOFF
}

/// `S` correction, streaming the set.
pub fn s_correction_streamed(config: &BetaJConfig, two: CertifiedValue, max_nodes: u64) -> Result<SCorrection> {
    config.validate()?;
    let cutoff = config.n_j as u128;
    let mut acc = CompensatedSum::new();
    let mut above = 0u64;
    let mut max_nu = 0u32;
    let stats = s_set_visit(config.j, config.e, true, max_nodes, |el| {
        if el.n > cutoff {
            acc.add(el.beta);
            above += 1;
            max_nu = max_nu.max(el.nu);
        }
    })?;
    let sum = acc.certify_with_term_error(s_term_rel_err(config.j, max_nu));
    Ok(SCorrection {
        value: two.mul(sum).div_exact(config.j as f64),
        stats,
        above_cutoff: above,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaJReport {
    pub config: BetaJConfig,
    pub main_term: CertifiedValue,
    pub two_adic: CertifiedValue,
    pub m_const: f64,
    pub t_set_size: usize,
    pub s_set_size: u64,
    pub s_above_cutoff: u64,
    pub s_correction: CertifiedValue,
    /// `(2/3)^j / (2 j e N_j^e)`.
    pub error_term: f64,
    /// Tail actually subtracted: the larger of `error_term` and the rigorous bound.
    pub tail_bound: f64,
    /// Subtracted only in direct mode.
    pub mixed_region_bound: f64,
    pub contribution_lower: f64,
    pub chunks_resumed: usize,
    pub chunks_computed: usize,
    pub elapsed_seconds: f64,
}

/// Runs the full pipeline for one `j`.
pub fn beta_j(config: &BetaJConfig, opts: &BetaOptions) -> Result<BetaJReport> {
    config.validate()?;
    let start = Instant::now();
    let main = main_term(config, opts)?;
    let corr = s_correction_streamed(config, main.two_adic, opts.max_s_nodes)?;
    let (j, e, n) = (config.j, config.e, config.n_j);
    let err = error_term(j, e, n);
    let tail_bound = err.max(rigorous_tail(j, e, n, main.two_adic.upper()));
    let mixed = mixed_region_bound(j, e, n, corr.stats.m_const);
    let mut lower = add_down(main.value.lower(), corr.value.lower());
    lower = sub_down(lower, tail_bound);
    if config.mode == MainTermMode::Direct {
        lower = sub_down(lower, mixed);
    }
    Ok(BetaJReport {
        config: *config,
        main_term: main.value,
        two_adic: main.two_adic,
        m_const: corr.stats.m_const,
        t_set_size: corr.stats.t_size,
        s_set_size: corr.stats.count,
        s_above_cutoff: corr.above_cutoff,
        s_correction: corr.value,
        error_term: err,
        tail_bound,
        mixed_region_bound: mixed,
        contribution_lower: lower,
        chunks_resumed: main.chunks_resumed,
        chunks_computed: main.chunks_computed,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub schema_version: u32,
    pub reports: Vec<BetaJReport>,
    /// Sum of the main terms, with radii.
    pub main_total: CertifiedValue,
    /// Certified lower bound for beta.
    pub lower_bound: f64,
}

/// Default schedule of `e_j` for `j = 1..=8`.
pub const DEFAULT_E: [f64; 8] = [1.0, 0.75, 0.60, 0.48, 0.35, 0.28, 0.20, 0.15];

/// Configurations for `j = 1..=e.len()` at a common cutoff.
pub fn default_configs(n_j: u64, e: &[f64]) -> Result<Vec<BetaJConfig>> {
    e.iter()
        .enumerate()
        .map(|(i, &e)| BetaJConfig::new(i as u32 + 1, n_j, e))
        .collect()
}

/// Certified lower bound for beta from the given `j` configurations. Every
/// omitted `j` contributes positively, so any set of distinct `j` is valid.
pub fn beta_lower(configs: &[BetaJConfig], opts: &BetaOptions) -> Result<BetaResult> {
    if configs.is_empty() {
        return Err(Error::param("beta_lower needs at least one configuration"));
    }
    let mut seen = std::collections::HashSet::new();
    for c in configs {
        c.validate()?;
        if !seen.insert(c.j) {
            return Err(Error::param(format!("duplicate configuration for j = {}", c.j)));
        }
    }
    let mut reports = Vec::with_capacity(configs.len());
    for c in configs {
        match beta_j(c, opts) {
            Ok(r) => reports.push(r),
            Err(source) => {
                return Err(Error::BetaAborted {
                    j: c.j,
                    source: Box::new(source),
                    partial: reports,
                })
            }
        }
    }
    let main_total = reports.iter().fold(CertifiedValue::ZERO, |acc, r| acc + r.main_term);
    let mut lower = 0.0;
    for r in &reports {
        lower = add_down(lower, r.contribution_lower);
    }
    Ok(BetaResult {
        schema_version: SCHEMA_VERSION,
        reports,
        main_total,
        lower_bound: lower,
    })
}

/// Upper end of the certified error budget of a sum of reports, for display.
pub fn total_error(reports: &[BetaJReport]) -> f64 {
    reports.iter().fold(0.0, |acc, r| add_up(acc, r.tail_bound))
}
