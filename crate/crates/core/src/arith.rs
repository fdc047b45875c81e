//! Fixed-width divisor-function arithmetic.
//!
//! Primality is deterministic Miller-Rabin over the whole `u64` range;
//! factorization is trial division followed by Pollard's rho with Brent's
//! cycle detection under an explicit iteration budget.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Witness set that makes strong-probable-prime testing exact below 2^64.
const MR_BASES: [u64; 7] = [2, 325, 9375, 28178, 450775, 9780504, 1795265022];

const SMALL_PRIMES: [u64; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Trial division bound used before falling back to rho.
const TRIAL_BOUND: u64 = 1 << 10;

/// Work budget for the rho stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effort {
    /// Total number of rho iterations allowed across all cofactors.
    pub rho_iterations: u64,
}

impl Default for Effort {
    fn default() -> Self {
        Self {
            rho_iterations: 1 << 24,
        }
    }
}

impl Effort {
    pub const fn new(rho_iterations: u64) -> Self {
        Self { rho_iterations }
    }
}

pub type PrimePowers = SmallVec<[(u64, u32); 12]>;

/// Prime-power decomposition of a positive integer `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factorization {
    n: u64,
    entries: PrimePowers,
}

impl Factorization {
    pub fn one() -> Self {
        Self {
            n: 1,
            entries: PrimePowers::new(),
        }
    }

    /// Builds a factorization from `(prime, exponent)` pairs, checking every
    /// invariant: primes strictly increasing and prime, exponents positive,
    /// product representable.
    pub fn from_entries<I: IntoIterator<Item = (u64, u32)>>(entries: I) -> Result<Self> {
        let entries: PrimePowers = entries.into_iter().collect();
        let mut n: u64 = 1;
        let mut last = 1u64;
        for &(p, m) in &entries {
            if m == 0 {
                return Err(Error::param(format!("zero exponent for prime {p}")));
            }
            if p <= last {
                return Err(Error::param("primes must be strictly increasing"));
            }
            if !is_prime(p) {
                return Err(Error::param(format!("{p} is not prime")));
            }
            last = p;
            let pm = checked_pow(p, m).ok_or(Error::Overflow("factorization product"))?;
            n = n.checked_mul(pm).ok_or(Error::Overflow("factorization product"))?;
        }
        Ok(Self { n, entries })
    }

    /// Trusted constructor for producers that already guarantee the invariants
    /// (the sieves). Checked in debug builds.
    pub(crate) fn from_parts_unchecked(n: u64, entries: PrimePowers) -> Self {
        debug_assert_eq!(
            entries.iter().try_fold(1u64, |acc, &(p, m)| acc.checked_mul(p.pow(m))),
            Some(n)
        );
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        Self { n, entries }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn entries(&self) -> &[(u64, u32)] {
        &self.entries
    }

    pub fn is_one(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exponent of 2 in `n`.
    pub fn two_adic_valuation(&self) -> u32 {
        match self.entries.first() {
            Some(&(2, m)) => m,
            _ => 0,
        }
    }

    /// The odd part's prime powers.
    pub fn odd_entries(&self) -> &[(u64, u32)] {
        if self.two_adic_valuation() > 0 {
            &self.entries[1..]
        } else {
            &self.entries
        }
    }
}

fn checked_pow(p: u64, m: u32) -> Option<u64> {
    p.checked_pow(m)
}

#[inline]
fn mul_mod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, n: u64) -> u64 {
    let mut result = 1 % n;
    base %= n;
    while exp > 0 {
        if exp & 1 == 1 {
            result = mul_mod(result, base, n);
        }
        base = mul_mod(base, base, n);
        exp >>= 1;
    }
    result
}

/// Deterministic primality test for the full `u64` range.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &SMALL_PRIMES {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    if n < 97 * 97 {
        return true;
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &MR_BASES {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Brent's variant of Pollard's rho. Returns a nontrivial factor of the odd
/// composite `n`, or `None` once `budget` iterations are spent.
fn rho_brent(n: u64, budget: &mut u64) -> Option<u64> {
    const BATCH: u64 = 128;
    let gcd = num_integer::gcd::<u64>;
    for c in 1..64u64 {
        let f = |x: u64| ((mul_mod(x, x, n) as u128 + c as u128) % n as u128) as u64;
        let mut y = 2u64;
        let mut r = 1u64;
        let mut q = 1u64;
        let mut x;
        let mut ys;
        let mut g;
        loop {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            loop {
                ys = y;
                let steps = BATCH.min(r - k);
                for _ in 0..steps {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                if *budget < steps {
                    *budget = 0;
                    return None;
                }
                *budget -= steps;
                g = gcd(q, n);
                k += steps;
                if k >= r || g != 1 {
                    break;
                }
            }
            r *= 2;
            if g != 1 {
                break;
            }
        }
        if g == n {
            // Backtrack one step at a time from the saved position.
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
                if g != 1 {
                    break;
                }
            }
        }
        if g != n && g != 1 {
            return Some(g);
        }
    }
    None
}

/// Factors `n >= 1` completely, or reports the cofactor that could not be
/// split within `effort`.
pub fn factorize(n: u64, effort: Effort) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::param("cannot factorize 0"));
    }
    let mut primes: SmallVec<[u64; 64]> = SmallVec::new();
    let mut rest = n;
    let tz = rest.trailing_zeros();
    for _ in 0..tz {
        primes.push(2);
    }
    rest >>= tz;
    let mut d = 3u64;
    while d <= TRIAL_BOUND && d * d <= rest {
        while rest % d == 0 {
            primes.push(d);
            rest /= d;
        }
        d += 2;
    }
    let mut budget = effort.rho_iterations;
    let mut unresolved: Option<u64> = None;
    if rest > 1 {
        if d * d > rest {
            primes.push(rest);
        } else {
            let mut stack = vec![rest];
            while let Some(m) = stack.pop() {
                if m == 1 {
                    continue;
                }
                if is_prime(m) {
                    primes.push(m);
                    continue;
                }
                if let Some(r) = perfect_square_root(m) {
                    stack.push(r);
                    stack.push(r);
                    continue;
                }
                match rho_brent(m, &mut budget) {
                    Some(f) => {
                        stack.push(f);
                        stack.push(m / f);
                    }
                    None => {
                        unresolved = Some(unresolved.map_or(m, |u| u * m));
                    }
                }
            }
        }
    }
    primes.sort_unstable();
    let mut entries = PrimePowers::new();
    for p in primes {
        match entries.last_mut() {
            Some((q, m)) if *q == p => *m += 1,
            _ => entries.push((p, 1)),
        }
    }
    match unresolved {
        None => Ok(Factorization::from_parts_unchecked(n, entries)),
        Some(cofactor) => {
            let partial_n = n / cofactor;
            Err(Error::UnresolvedCofactor {
                partial: Factorization::from_parts_unchecked(partial_n, entries),
                cofactor,
            })
        }
    }
}

fn perfect_square_root(m: u64) -> Option<u64> {
    let r = m.isqrt();
    (r * r == m).then_some(r)
}

/// `1 + p + ... + p^m`, exactly.
pub fn sigma_prime_power(p: u64, m: u32) -> Result<u64> {
    let mut total: u64 = 1;
    let mut pk: u64 = 1;
    for _ in 0..m {
        pk = pk.checked_mul(p).ok_or(Error::Overflow("sigma"))?;
        total = total.checked_add(pk).ok_or(Error::Overflow("sigma"))?;
    }
    Ok(total)
}

/// Sum of divisors, computed multiplicatively. Overflow is an error.
pub fn sigma(f: &Factorization) -> Result<u64> {
    f.entries()
        .iter()
        .try_fold(1u64, |acc, &(p, m)| acc.checked_mul(sigma_prime_power(p, m)?).ok_or(Error::Overflow("sigma")))
}

/// Sum of the proper divisors, `s(n) = sigma(n) - n`, with `s(1) = 0`.
pub fn aliquot_sum(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::param("s(n) is defined for n >= 1"));
    }
    let f = factorize(n, Effort::default())?;
    Ok(sigma(&f)? - n)
}

/// Number of distinct prime divisors.
pub fn nu(f: &Factorization) -> usize {
    f.entries().len()
}

/// Largest `n` accepted by [`sigma_oracle`].
pub const SIGMA_ORACLE_LIMIT: u64 = 10_000_000;

/// Sum of divisors by plain divisor enumeration; a test oracle independent of
/// factorization.
pub fn sigma_oracle(n: u64) -> u64 {
    assert!((1..=SIGMA_ORACLE_LIMIT).contains(&n), "sigma_oracle: n out of oracle range");
    let mut total = 0;
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            total += d;
            if d * d != n {
                total += n / d;
            }
        }
        d += 1;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial_division_is_prime(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn primality_examples() {
        assert!(!is_prime(0));
        assert!(!is_prime(1));
        assert!(is_prime(2));
        assert!(is_prime(97));
        let big = 1_000_000_000_000 + 39;
        assert_eq!(is_prime(big), trial_division_is_prime(big));
        assert!(is_prime(big));
        // Strong pseudoprimes to several small bases.
        assert!(!is_prime(3_215_031_751));
        assert!(!is_prime(3_825_123_056_546_413_051));
        assert!(is_prime(18_446_744_073_709_551_557));
    }

    #[test]
    fn primality_agrees_with_trial_division_below_1e5() {
        for n in 0..100_000 {
            assert_eq!(is_prime(n), trial_division_is_prime(n), "n = {n}");
        }
    }

    #[test]
    fn factorize_examples() {
        let f = factorize(360, Effort::default()).unwrap();
        assert_eq!(f.entries(), &[(2, 3), (3, 2), (5, 1)]);
        assert!(factorize(1, Effort::default()).unwrap().is_one());
        assert!(factorize(0, Effort::default()).is_err());
    }

    #[test]
    fn factorize_semiprime_of_ten_digit_primes() {
        let p = 2_147_483_647u64;
        let q = 4_294_967_291u64;
        let f = factorize(p * q, Effort::default()).unwrap();
        assert_eq!(f.entries(), &[(p, 1), (q, 1)]);
        let back: u64 = f.entries().iter().map(|&(p, m)| p.pow(m)).product();
        assert_eq!(back, p * q);
    }

    #[test]
    fn exhausted_effort_returns_partial() {
        let p = 1_000_003u64;
        let q = 1_000_033u64;
        match factorize(12 * p * q, Effort::new(4)) {
            Err(Error::UnresolvedCofactor { partial, cofactor }) => {
                assert_eq!(cofactor, p * q);
                assert_eq!(partial.n(), 12);
                assert_eq!(partial.entries(), &[(2, 2), (3, 1)]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sigma_examples() {
        let s = |n| sigma(&factorize(n, Effort::default()).unwrap()).unwrap();
        assert_eq!(s(12), 28);
        assert_eq!(s(1), 1);
        assert_eq!(s(32), 63);
        assert_eq!(sigma_oracle(12), 28);
        assert_eq!(sigma_oracle(28), 56);
    }

    #[test]
    fn sigma_overflow_is_reported() {
        let f = Factorization::from_entries([(2, 62), (3, 1)]).unwrap();
        assert!(matches!(sigma(&f), Err(Error::Overflow(_))));
    }

    #[test]
    fn aliquot_sum_examples() {
        assert_eq!(aliquot_sum(1).unwrap(), 0);
        assert_eq!(aliquot_sum(97).unwrap(), 1);
        assert_eq!(aliquot_sum(28).unwrap(), 28);
        assert_eq!(aliquot_sum(12).unwrap(), 16);
    }

    #[test]
    fn nu_examples() {
        let nu_of = |n| nu(&factorize(n, Effort::default()).unwrap());
        assert_eq!(nu_of(1), 0);
        assert_eq!(nu_of(12), 2);
        assert_eq!(nu_of(30), 3);
    }

    #[test]
    fn sigma_matches_oracle_up_to_1e4() {
        for n in 1..=10_000 {
            let f = factorize(n, Effort::default()).unwrap();
            assert_eq!(sigma(&f).unwrap(), sigma_oracle(n), "n = {n}");
        }
    }

    #[test]
    fn sigma_is_multiplicative_on_coprime_pairs() {
        for a in 1..=1000u64 {
            for b in (1..=1000u64).step_by(7) {
                if num_integer::gcd(a, b) == 1 {
                    assert_eq!(sigma_oracle(a * b), sigma_oracle(a) * sigma_oracle(b));
                }
            }
        }
    }

    #[test]
    fn even_abundance_ratio_at_least_three_halves() {
        for n in (2..=100_000u64).step_by(2) {
            let s = sigma(&factorize(n, Effort::default()).unwrap()).unwrap();
            assert!(2 * s >= 3 * n, "n = {n}");
        }
    }

    #[test]
    fn deficiency_and_perfect_numbers_below_1e4() {
        let mut perfect = Vec::new();
        for n in 2..=10_000u64 {
            let s = aliquot_sum(n).unwrap();
            let sig = sigma_oracle(n);
            assert_eq!(s < n, sig < 2 * n);
            if s == n {
                perfect.push(n);
            }
        }
        assert_eq!(perfect, vec![6, 28, 496, 8128]);
    }

    #[test]
    fn from_entries_validates() {
        assert!(Factorization::from_entries([(3, 1), (2, 1)]).is_err());
        assert!(Factorization::from_entries([(4, 1)]).is_err());
        assert!(Factorization::from_entries([(2, 0)]).is_err());
        assert_eq!(Factorization::from_entries([(2, 2), (7, 1)]).unwrap().n(), 28);
    }

    proptest! {
        #[test]
        fn factorization_multiplies_back(n in 1u64..u64::MAX / 2) {
            let f = factorize(n, Effort::default()).unwrap();
            let mut back = 1u64;
            let mut last = 1;
            for &(p, m) in f.entries() {
                prop_assert!(p > last);
                prop_assert!(is_prime(p));
                last = p;
                back *= p.pow(m);
            }
            prop_assert_eq!(back, n);
        }
    }
}
