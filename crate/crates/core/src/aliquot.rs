//! Aliquot sequences: iterate `s(n) = sigma(n) - n` on arbitrary-size integers.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{self, Effort};
use crate::error::{Error, Result};
use crate::primes::small_primes;
use crate::SCHEMA_VERSION;

const TRIAL_LIMIT: u64 = 1 << 16;

/// Bases for the strong probable-prime test above 64 bits. The first 13 prime
/// bases are exact below 3.3 * 10^24; beyond that the test is probabilistic.
const BIG_MR_BASES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    TerminatesAt1,
    /// `terms[entry + length] == terms[entry]` with `length` minimal.
    Cycle { length: usize, entry: usize },
    EffortExhausted,
    StepLimitReached,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    #[serde(with = "decimal")]
    pub start: BigUint,
    #[serde(with = "decimal_vec")]
    pub terms: Vec<BigUint>,
    pub classification: Classification,
    /// Indices `k` with `terms[k] > 1` a square or twice a square: the only
    /// places where `s` may change parity.
    pub parity_events: Vec<usize>,
}

/// JSON envelope for a trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryDocument {
    pub schema_version: u32,
    pub max_steps: usize,
    pub effort: Effort,
    pub trajectory: TrajectoryRecord,
}

impl TrajectoryDocument {
    pub fn new(trajectory: TrajectoryRecord, max_steps: usize, effort: Effort) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            max_steps,
            effort,
            trajectory,
        }
    }
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let text = String::deserialize(d)?;
        BigUint::parse_bytes(text.as_bytes(), 10).ok_or_else(|| D::Error::custom(format!("not a decimal integer: {text:?}")))
    }
}

mod decimal_vec {
    use num_bigint::BigUint;
    use serde::{de::Error, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for n in v {
            seq.serialize_element(&n.to_str_radix(10))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|t| BigUint::parse_bytes(t.as_bytes(), 10).ok_or_else(|| D::Error::custom(format!("not a decimal integer: {t:?}"))))
            .collect()
    }
}

fn is_square(n: &BigUint) -> bool {
    let r = n.sqrt();
    &(&r * &r) == n
}

/// Whether `n` is a square or twice a square.
pub fn is_parity_breaker(n: &BigUint) -> bool {
    if is_square(n) {
        return true;
    }
    n.is_even() && is_square(&(n >> 1u32))
}

fn is_probable_prime_big(n: &BigUint) -> bool {
    if let Some(small) = n.to_u64() {
        return arith::is_prime(small);
    }
    if n.is_even() {
        return false;
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for &a in &BIG_MR_BASES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn rho_brent_big(n: &BigUint, budget: &mut u64) -> Option<BigUint> {
    const BATCH: u64 = 128;
    let one = BigUint::one();
    for c in 1..32u32 {
        let c = BigUint::from(c);
        let f = |x: &BigUint| (x * x + &c) % n;
        let abs_diff = |a: &BigUint, b: &BigUint| if a > b { a - b } else { b - a };
        let mut y = BigUint::from(2u32);
        let mut r = 1u64;
        let mut q = BigUint::one();
        let mut x;
        let mut ys;
        let mut g;
        loop {
            x = y.clone();
            for _ in 0..r {
                y = f(&y);
            }
            let mut k = 0;
            loop {
                ys = y.clone();
                let steps = BATCH.min(r - k);
                if *budget < steps {
                    *budget = 0;
                    return None;
                }
                *budget -= steps;
                for _ in 0..steps {
                    y = f(&y);
                    q = (q * abs_diff(&x, &y)) % n;
                }
                g = q.gcd(n);
                k += steps;
                if k >= r || g != one {
                    break;
                }
            }
            r *= 2;
            if g != one {
                break;
            }
        }
        if &g == n {
            loop {
                ys = f(&ys);
                g = abs_diff(&x, &ys).gcd(n);
                if g != one {
                    break;
                }
            }
        }
        if &g != n && g != one {
            return Some(g);
        }
    }
    None
}

/// Prime factorization of an arbitrary-size integer, or `None` when the
/// effort budget runs out on a composite cofactor.
pub fn factorize_big(n: &BigUint, effort: Effort) -> Result<Option<Vec<(BigUint, u32)>>> {
    if n.is_zero() {
        return Err(Error::param("cannot factorize 0"));
    }
    if let Some(small) = n.to_u64() {
        return match arith::factorize(small, effort) {
            Ok(f) => Ok(Some(f.entries().iter().map(|&(p, m)| (BigUint::from(p), m)).collect())),
            Err(Error::UnresolvedCofactor { .. }) => Ok(None),
            Err(e) => Err(e),
        };
    }
    let mut primes: Vec<BigUint> = Vec::new();
    let mut rest = n.clone();
    for p in small_primes(TRIAL_LIMIT) {
        if (&rest % p).is_zero() {
            let bp = BigUint::from(p);
            while (&rest % p).is_zero() {
                rest /= p;
                primes.push(bp.clone());
            }
        }
        if &BigUint::from(p * p) > &rest {
            break;
        }
    }
    let mut budget = effort.rho_iterations;
    let mut stack = vec![rest];
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        if let Some(small) = m.to_u64() {
            match arith::factorize(small, Effort::new(budget)) {
                Ok(f) => {
                    for &(p, e) in f.entries() {
                        primes.extend(std::iter::repeat_n(BigUint::from(p), e as usize));
                    }
                    continue;
                }
                Err(Error::UnresolvedCofactor { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        if is_probable_prime_big(&m) {
            primes.push(m);
            continue;
        }
        let r = m.sqrt();
        if &r * &r == m {
            stack.push(r.clone());
            stack.push(r);
            continue;
        }
        match rho_brent_big(&m, &mut budget) {
            Some(f) => {
                let other = &m / &f;
                stack.push(f);
                stack.push(other);
            }
            None => return Ok(None),
        }
    }
    primes.sort();
    let mut out: Vec<(BigUint, u32)> = Vec::new();
    for p in primes {
        match out.last_mut() {
            Some((q, m)) if *q == p => *m += 1,
            _ => out.push((p, 1)),
        }
    }
    Ok(Some(out))
}

/// `sigma(n)` from a factorization.
pub fn sigma_big(factors: &[(BigUint, u32)]) -> BigUint {
    let one = BigUint::one();
    factors.iter().fold(BigUint::one(), |acc, (p, m)| {
        let num = p.pow(m + 1) - &one;
        acc * (num / (p - &one))
    })
}

/// `s(n)`, or `None` if `n` could not be factored within `effort`.
pub fn aliquot_sum_big(n: &BigUint, effort: Effort) -> Result<Option<BigUint>> {
    Ok(factorize_big(n, effort)?.map(|f| sigma_big(&f) - n))
}

/// Iterates `s` from `start` until the sequence reaches 1, repeats a term,
/// runs out of factorization effort, or has taken `max_steps` steps.
pub fn trace(start: &BigUint, max_steps: usize, effort: Effort) -> Result<TrajectoryRecord> {
    if start < &BigUint::from(2u32) {
        return Err(Error::param("aliquot traces start at n >= 2"));
    }
    let mut terms = vec![start.clone()];
    let mut seen: HashMap<BigUint, usize> = HashMap::new();
    seen.insert(start.clone(), 0);
    let mut classification = Classification::StepLimitReached;
    for _ in 0..max_steps {
        let current = terms.last().expect("nonempty");
        let Some(next) = aliquot_sum_big(current, effort)? else {
            classification = Classification::EffortExhausted;
            break;
        };
        let index = terms.len();
        terms.push(next.clone());
        if next.is_one() {
            classification = Classification::TerminatesAt1;
            break;
        }
        if let Some(&entry) = seen.get(&next) {
            classification = Classification::Cycle {
                length: index - entry,
                entry,
            };
            break;
        }
        seen.insert(next, index);
    }
    let one = BigUint::one();
    let parity_events = terms
        .iter()
        .enumerate()
        .filter(|(_, t)| **t > one && is_parity_breaker(t))
        .map(|(k, _)| k)
        .collect();
    Ok(TrajectoryRecord {
        start: start.clone(),
        terms,
        classification,
        parity_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn values(r: &TrajectoryRecord) -> Vec<u64> {
        r.terms.iter().map(|t| t.to_u64().unwrap()).collect()
    }

    #[test]
    fn twelve_terminates() {
        let r = trace(&big(12), 100, Effort::default()).unwrap();
        assert_eq!(values(&r), vec![12, 16, 15, 9, 4, 3, 1]);
        assert_eq!(r.classification, Classification::TerminatesAt1);
        // 16 and 9 and 4 are squares.
        assert_eq!(r.parity_events, vec![1, 3, 4]);
    }

    #[test]
    fn perfect_number_is_a_fixed_point() {
        let r = trace(&big(6), 10, Effort::default()).unwrap();
        assert_eq!(values(&r), vec![6, 6]);
        assert_eq!(r.classification, Classification::Cycle { length: 1, entry: 0 });
    }

    #[test]
    fn amicable_pair() {
        let r = trace(&big(220), 10, Effort::default()).unwrap();
        assert_eq!(values(&r), vec![220, 284, 220]);
        assert_eq!(r.classification, Classification::Cycle { length: 2, entry: 0 });
    }

    #[test]
    fn twenty_five_reaches_six() {
        let r = trace(&big(25), 10, Effort::default()).unwrap();
        assert_eq!(values(&r), vec![25, 6, 6]);
        assert_eq!(r.classification, Classification::Cycle { length: 1, entry: 1 });
        assert_eq!(r.parity_events, vec![0]);
    }

    #[test]
    fn step_limit() {
        let r = trace(&big(276), 5, Effort::default()).unwrap();
        assert_eq!(r.terms.len(), 6);
        assert_eq!(r.classification, Classification::StepLimitReached);
        assert!(trace(&big(1), 5, Effort::default()).is_err());
    }

    #[test]
    fn known_cycles() {
        for p in [6u64, 28, 496, 8128] {
            let r = trace(&big(p), 5, Effort::default()).unwrap();
            assert_eq!(r.classification, Classification::Cycle { length: 1, entry: 0 });
        }
        for (a, b) in [(220u64, 284u64), (1184, 1210)] {
            let r = trace(&big(a), 5, Effort::default()).unwrap();
            assert_eq!(values(&r), vec![a, b, a]);
        }
        // A sociable 5-cycle.
        let r = trace(&big(12496), 10, Effort::default()).unwrap();
        assert_eq!(r.classification, Classification::Cycle { length: 5, entry: 0 });
    }

    #[test]
    fn big_terms_are_factored_beyond_64_bits() {
        let p = big(18_446_744_073_709_551_557); // largest 64-bit prime
        let n = &p * &p * big(12);
        let f = factorize_big(&n, Effort::default()).unwrap().unwrap();
        assert_eq!(f, vec![(big(2), 2), (big(3), 1), (p.clone(), 2)]);
        let s = aliquot_sum_big(&n, Effort::default()).unwrap().unwrap();
        assert_eq!(s, sigma_big(&f) - &n);
    }

    #[test]
    fn effort_exhaustion_is_a_classification() {
        // Product of two 40-bit primes times 2: rho needs ~2^20 steps.
        let next_prime = |mut k: u64| {
            while !arith::is_prime(k) {
                k += 1;
            }
            k
        };
        let p = big(next_prime(1 << 40));
        let q = big(next_prime((1 << 40) + 1000));
        let n = &p * &q * big(2);
        let r = trace(&n, 3, Effort::new(16)).unwrap();
        assert_eq!(r.classification, Classification::EffortExhausted);
        assert_eq!(r.terms.len(), 1);
    }

    #[test]
    fn replay_reproduces_record() {
        let r = trace(&big(138), 200, Effort::default()).unwrap();
        for w in r.terms.windows(2) {
            assert_eq!(aliquot_sum_big(&w[0], Effort::default()).unwrap().unwrap(), w[1]);
        }
        assert_eq!(r.classification, Classification::TerminatesAt1);
    }

    #[test]
    fn parity_only_changes_at_listed_events() {
        // Deterministic pseudo-random even starts.
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        for _ in 0..1000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let start = 2 * ((state >> 33) % 500_000 + 1);
            let r = trace(&big(start), 50, Effort::default()).unwrap();
            for i in 0..r.terms.len() - 1 {
                if r.terms[i] > BigUint::one() && !r.parity_events.contains(&i) {
                    assert_eq!(r.terms[i].is_even(), r.terms[i + 1].is_even(), "start {start} index {i}");
                }
            }
        }
    }

    #[test]
    fn json_uses_decimal_strings() {
        let r = trace(&big(220), 10, Effort::default()).unwrap();
        let doc = TrajectoryDocument::new(r.clone(), 10, Effort::default());
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.contains("\"terms\":[\"220\",\"284\",\"220\"]"));
        assert!(text.contains("\"kind\":\"cycle\""));
        let back: TrajectoryDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.trajectory, r);
    }
}
