//! Assembly of `lambda = alpha - beta` and `mu = e^lambda` from the two bounds.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alpha::{alpha_upper_bound, AlphaParams, AlphaResult};
use crate::beta::{beta_lower, default_configs, BetaJConfig, BetaOptions, BetaResult, DEFAULT_E};
use crate::error::{Error, Result};
use crate::numerics::sub_up;
use crate::SCHEMA_VERSION;

/// Default common `N_j` for the beta part.
pub const DEFAULT_BETA_N: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaConfig {
    pub alpha: AlphaParams,
    pub beta: Vec<BetaJConfig>,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        Self {
            alpha: AlphaParams::default(),
            beta: default_configs(DEFAULT_BETA_N, &DEFAULT_E).expect("default beta configuration is valid"),
        }
    }
}

impl LambdaConfig {
    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        if self.beta.is_empty() {
            return Err(Error::param("lambda needs at least one beta configuration"));
        }
        for c in &self.beta {
            c.validate()?;
        }
        Ok(())
    }
}

/// `lambda_upper = alpha_upper - beta_lower` rounded up and
/// `mu_upper = exp(lambda_upper)` rounded up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBound {
    pub lambda_upper: f64,
    pub mu_upper: f64,
}

pub fn combine_lambda(alpha_upper: f64, beta_lower: f64) -> LambdaBound {
    let lambda_upper = sub_up(alpha_upper, beta_lower);
    // exp is faithful to within one ulp; step up twice
    let mu_upper = if lambda_upper == 0.0 {
        1.0
    } else {
        lambda_upper.exp().next_up().next_up()
    };
    LambdaBound { lambda_upper, mu_upper }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub crate_version: String,
    pub workers: usize,
    pub alpha_seconds: f64,
    pub beta_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub schema_version: u32,
    pub config: LambdaConfig,
    pub alpha_result: AlphaResult,
    pub beta_result: BetaResult,
    pub lambda_upper: f64,
    pub mu_upper: f64,
    pub provenance: Provenance,
}

/// Runs alpha and beta and combines them.
pub fn run_lambda(config: &LambdaConfig, opts: &BetaOptions) -> Result<LambdaReport> {
    config.validate()?;
    let start = Instant::now();
    let alpha_result = alpha_upper_bound(&config.alpha, opts.workers)?;
    let alpha_seconds = start.elapsed().as_secs_f64();
    let beta_start = Instant::now();
    let beta_result = beta_lower(&config.beta, opts)?;
    let beta_seconds = beta_start.elapsed().as_secs_f64();
    let bound = combine_lambda(alpha_result.upper_bound, beta_result.lower_bound);
    Ok(LambdaReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        alpha_result,
        beta_result,
        lambda_upper: bound.lambda_upper,
        mu_upper: bound.mu_upper,
        provenance: Provenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            workers: opts.workers,
            alpha_seconds,
            beta_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    })
}
