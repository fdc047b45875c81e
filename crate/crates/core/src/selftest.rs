//! Fast oracle suites shared by the `selftest` command and the acceptance tests.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::aliquot::{trace, Classification};
use crate::alpha::{alpha_upper_bound, AlphaParams};
use crate::arith::{factorize, sigma, sigma_oracle, Effort, Factorization};
use crate::beta::{beta_signed, h, h_prime_power_binomial, main_term, s_set, BetaJConfig, BetaOptions};
use crate::error::Result;
use crate::primes::small_primes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, result: Result<std::result::Result<String, String>>) -> CheckOutcome {
    let (passed, detail) = match result {
        Ok(Ok(d)) => (true, d),
        Ok(Err(d)) => (false, d),
        Err(e) => (false, format!("error: {e}")),
    };
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

type Check = Result<std::result::Result<String, String>>;

/// `sigma` via factorization against the divisor-sum oracle for `n <= limit`.
pub fn check_sigma_oracle(limit: u64) -> Check {
    for n in 1..=limit {
        let s = sigma(&factorize(n, Effort::default())?)?;
        if s != sigma_oracle(n) {
            return Ok(Err(format!("sigma({n}) = {s}, oracle {}", sigma_oracle(n))));
        }
    }
    Ok(Ok(format!("n <= {limit}")))
}

/// Product of truncated `beta_j(p)` over `3 <= p <= P` against the sum of
/// `beta_j(n)` over the matching odd smooth `n`.
pub fn check_product_sum_identity(max_j: u32, cutoffs: &[u64], depth: u32) -> Check {
    let mut worst = 0.0f64;
    for j in 1..=max_j {
        for &cutoff in cutoffs {
            let primes: Vec<u64> = small_primes(cutoff).into_iter().filter(|&p| p > 2).collect();
            let mut product = 1.0;
            for &p in &primes {
                let mut local = 0.0;
                for m in 0..=depth {
                    local += beta_signed(j, &Factorization::from_entries((m > 0).then_some((p, m)))?)?;
                }
                product *= local;
            }
            let mut expansion: Vec<Vec<(u64, u32)>> = vec![Vec::new()];
            for &p in &primes {
                let mut next = Vec::with_capacity(expansion.len() * (depth as usize + 1));
                for entries in &expansion {
                    for m in 0..=depth {
                        let mut e = entries.clone();
                        if m > 0 {
                            e.push((p, m));
                        }
                        next.push(e);
                    }
                }
                expansion = next;
            }
            let mut sum = 0.0;
            for entries in expansion {
                sum += beta_signed(j, &Factorization::from_entries(entries)?)?;
            }
            let diff = (sum - product).abs();
            worst = worst.max(diff);
            if diff > 1e-14 {
                return Ok(Err(format!("j = {j}, P = {cutoff}: sum {sum} vs product {product}")));
            }
        }
    }
    Ok(Ok(format!("max deviation {worst:.1e}")))
}

/// Closed form of `h_j(p^m)` against the binomial sum.
pub fn check_h_closed_form(max_j: u32, limit: u64) -> Check {
    let mut worst = 0.0f64;
    for j in 1..=max_j {
        for p in small_primes(limit) {
            let mut q = p;
            let mut m = 1;
            while q <= limit {
                let a = h(j, &Factorization::from_entries([(p, m)])?)?;
                let b = h_prime_power_binomial(j, p, m)?;
                let diff = (a - b).abs();
                worst = worst.max(diff);
                if diff > 1e-15 * b.max(1.0) {
                    return Ok(Err(format!("j = {j}, {p}^{m}: {a} vs {b}")));
                }
                q *= p;
                m += 1;
            }
        }
    }
    Ok(Ok(format!("max deviation {worst:.1e}")))
}

pub fn check_s_empty_j1_e1() -> Check {
    let s = s_set(1, 1.0, true, 16)?;
    Ok(if s.is_empty() {
        Ok("empty".into())
    } else {
        Err(format!("{} elements", s.len()))
    })
}

/// `S_{2,1/2}` over odd `n` is `{3, 15, 21, 105}`, checked against every divisor of 105.
pub fn check_s_j2_half() -> Check {
    let s: Vec<u128> = s_set(2, 0.5, true, 1024)?.iter().map(|e| e.n).collect();
    if s != [3, 15, 21, 105] {
        return Ok(Err(format!("got {s:?}")));
    }
    for d in [1u64, 3, 5, 7, 15, 21, 35, 105] {
        let inside = h(2, &factorize(d, Effort::default())?)? > (d as f64).powf(-0.5);
        if inside != s.contains(&(d as u128)) {
            return Ok(Err(format!("divisor {d} misclassified")));
        }
    }
    Ok(Ok("{3, 15, 21, 105}".into()))
}

fn values(terms: &[BigUint]) -> Vec<u64> {
    terms.iter().map(|t| t.to_u64().unwrap_or(u64::MAX)).collect()
}

/// Trajectories of 12, 6, 220 and 25.
pub fn check_trajectory_fixtures() -> Check {
    let effort = Effort::default();
    let fixtures: [(u64, &[u64], Classification); 4] = [
        (12, &[12, 16, 15, 9, 4, 3, 1], Classification::TerminatesAt1),
        (6, &[6, 6], Classification::Cycle { length: 1, entry: 0 }),
        (220, &[220, 284, 220], Classification::Cycle { length: 2, entry: 0 }),
        (25, &[25, 6, 6], Classification::Cycle { length: 1, entry: 1 }),
    ];
    for (start, expect, class) in fixtures {
        let r = trace(&BigUint::from(start), 100, effort)?;
        if values(&r.terms) != expect || r.classification != class {
            return Ok(Err(format!("start {start}: {:?} {:?}", values(&r.terms), r.classification)));
        }
    }
    Ok(Ok("12, 6, 220, 25".into()))
}

/// One alpha and one beta block sum with 1 and 4 workers.
pub fn check_thread_independence() -> Check {
    let params = AlphaParams::new(3_000_000, 15, 15)?;
    let a1 = alpha_upper_bound(&params, 1)?;
    let a4 = alpha_upper_bound(&params, 4)?;
    if a1.sums.value.to_bits() != a4.sums.value.to_bits() || a1.upper_bound.to_bits() != a4.upper_bound.to_bits() {
        return Ok(Err("alpha differs between 1 and 4 workers".into()));
    }
    let config = BetaJConfig::new(3, 3_000_000, 0.6)?;
    let b1 = main_term(&config, &BetaOptions { workers: 1, ..BetaOptions::default() })?;
    let b4 = main_term(&config, &BetaOptions { workers: 4, ..BetaOptions::default() })?;
    if b1.value.value.to_bits() != b4.value.value.to_bits() || b1.value.error_radius.to_bits() != b4.value.error_radius.to_bits() {
        return Ok(Err("beta main term differs between 1 and 4 workers".into()));
    }
    Ok(Ok("alpha N = 3e6 and beta j = 3, N = 3e6 bit-identical".into()))
}

/// Runs every suite.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        outcome("sigma oracle n <= 1e4", check_sigma_oracle(10_000)),
        outcome("product-sum identity j <= 4, P in {5, 11}", check_product_sum_identity(4, &[5, 11], 6)),
        outcome("h closed form vs binomial sum", check_h_closed_form(6, 1000)),
        outcome("S_{1,1} empty", check_s_empty_j1_e1()),
        outcome("S_{2,0.5} odd", check_s_j2_half()),
        outcome("trajectory fixtures", check_trajectory_fixtures()),
        outcome("thread-count bit identity", check_thread_independence()),
    ]
}
