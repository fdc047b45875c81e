//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use aliquot_core::alpha::{alpha_upper_bound, AlphaParams};
use aliquot_core::beta::{default_configs, error_term, main_term, s_set_visit, BetaJConfig, BetaOptions, DEFAULT_E, DEFAULT_MAX_S_NODES};
use aliquot_core::lambda::{run_lambda, LambdaConfig};
use aliquot_core::means::{arithmetic_mean, closed_form, log_mean, MeanClass};
use aliquot_core::{selftest, Error};

type Outcome = Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn within(elapsed: Duration, limit_secs: u64, detail: String) -> Outcome {
    if elapsed.as_secs() >= limit_secs {
        Err(format!("{detail}; took {:.1} s, limit {limit_secs} s", elapsed.as_secs_f64()))
    } else {
        Ok(detail)
    }
}

fn alpha_table() -> Outcome {
    let start = Instant::now();
    let rows = [(10_000u64, 0.6983072233, 1.0000093132e-4), (100_000, 0.6983162365, 1.0000931323e-5), (1_000_000, 0.6983169710, 1.0009313233e-6)];
    for (n, sums, tail) in rows {
        let r = alpha_upper_bound(&AlphaParams::new(n, 15, 15).map_err(|e| e.to_string())?, 0).map_err(|e| e.to_string())?;
        if (r.sums.value - sums).abs() > 1e-9 {
            return Err(format!("N = {n}: sums {:.13} vs {sums}", r.sums.value));
        }
        if rel(r.tail_total, tail) > 5e-6 {
            return Err(format!("N = {n}: tail {:.10e} vs {tail:e}", r.tail_total));
        }
        if r.upper_bound < r.sums.value + r.tail_total {
            return Err(format!("N = {n}: upper bound below sums + tail"));
        }
    }
    within(start.elapsed(), 60, "N = 1e4, 1e5, 1e6".into())
}

fn alpha_large_n() -> Outcome {
    let start = Instant::now();
    let r = alpha_upper_bound(&AlphaParams::new(100_000_000, 15, 15).map_err(|e| e.to_string())?, 0).map_err(|e| e.to_string())?;
    let detail = format!("upper_bound {:.13}", r.upper_bound);
    if r.upper_bound >= 0.69831705 {
        return Err(detail);
    }
    within(start.elapsed(), 1800, detail)
}

fn beta_error_formula() -> Outcome {
    let table = [(3u32, 0.60, 3.276e-7), (4, 0.48, 2.462e-6), (5, 0.35, 2.66e-5), (6, 0.28, 7.89e-5), (7, 0.20, 3.31e-4), (8, 0.15, 7.26e-4), (9, 0.03, 2.59e-2)];
    for (j, e, v) in table {
        let got = error_term(j, e, 1_000_000_000);
        // three significant digits
        if rel(got, v) > 5e-3 {
            return Err(format!("j = {j}: {got:.4e} vs {v:e}"));
        }
    }
    Ok("j = 3..9".into())
}

fn beta_main_terms() -> Outcome {
    let start = Instant::now();
    let table = [0.508058, 0.134230, 0.048944, 0.020684, 0.009564, 0.004706, 0.002425, 0.001295];
    let configs = default_configs(10_000_000, &DEFAULT_E).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (c, want) in configs.iter().zip(table) {
        let m = main_term(c, &BetaOptions::default()).map_err(|e| e.to_string())?;
        let tol = error_term(c.j, c.e, 10_000_000) + 1e-6;
        let diff = (m.value.value - want).abs();
        if diff > tol {
            return Err(format!("j = {}: {:.9} vs {want} (tolerance {tol:.2e})", c.j, m.value.value));
        }
        worst = worst.max(diff);
    }
    within(start.elapsed(), 600, format!("j = 1..8, max deviation {worst:.2e}"))
}

fn certified_lambda() -> Outcome {
    let start = Instant::now();
    let r = run_lambda(&LambdaConfig::default(), &BetaOptions::default()).map_err(|e| e.to_string())?;
    let detail = format!(
        "alpha <= {:.10}, beta >= {:.10}, lambda <= {:.6}, mu <= {:.6}",
        r.alpha_result.upper_bound, r.beta_result.lower_bound, r.lambda_upper, r.mu_upper
    );
    if r.lambda_upper > -0.026 || r.mu_upper >= 0.975 {
        return Err(detail);
    }
    within(start.elapsed(), 900, detail)
}

fn means() -> Outcome {
    let start = Instant::now();
    for (n, want) in [(100u64, -0.0567457527), (10_000, -0.0335201796), (1_000_000, -0.0332626444)] {
        let got = log_mean(MeanClass::Even, n).map_err(|e| e.to_string())?.value;
        if (got - want).abs() > 1e-8 {
            return Err(format!("log_mean(even, {n}) = {got:.10} vs {want}"));
        }
    }
    for (class, limit) in [(MeanClass::All, 0.6449), (MeanClass::Even, 1.0562), (MeanClass::Odd, 0.2337)] {
        let got = arithmetic_mean(class, 1_000_000).map_err(|e| e.to_string())?.value;
        if (got - limit).abs() > 1e-3 || (closed_form(class) - limit).abs() > 1e-4 {
            return Err(format!("arithmetic_mean({class}, 1e6) = {got:.6} vs {limit}"));
        }
    }
    within(start.elapsed(), 60, "log means and arithmetic limits".into())
}

fn property_suites() -> Outcome {
    let start = Instant::now();
    let outcomes = selftest::run_all();
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| format!("{}: {}", o.name, o.detail)).collect();
    if !failed.is_empty() {
        return Err(failed.join("; "));
    }
    within(start.elapsed(), 60, format!("{} suites", outcomes.len()))
}

fn full_scale_and_resume() -> Outcome {
    let full = default_configs(1_000_000_000, &DEFAULT_E).map_err(|e| e.to_string())?;
    if full.len() != 8 || full.iter().any(|c| c.validate().is_err()) {
        return Err("full-scale configuration rejected".into());
    }
    let lambda = LambdaConfig {
        alpha: AlphaParams::new(1_000_000_000, 15, 15).map_err(|e| e.to_string())?,
        beta: full,
    };
    lambda.validate().map_err(|e| e.to_string())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = BetaJConfig::new(3, 2_000_000, 0.6).map_err(|e| e.to_string())?;
    let base = BetaOptions {
        block_size: 100_000,
        blocks_per_chunk: 2,
        ..BetaOptions::default()
    };
    let reference = main_term(&config, &base).map_err(|e| e.to_string())?;
    let checkpointed = BetaOptions {
        checkpoint_dir: Some(dir.path().to_path_buf()),
        stop_after_chunks: Some(4),
        ..base.clone()
    };
    match main_term(&config, &checkpointed) {
        Err(Error::Interrupted { .. }) => {}
        other => return Err(format!("expected an interruption, got {other:?}")),
    }
    let resumed = main_term(
        &config,
        &BetaOptions {
            stop_after_chunks: None,
            ..checkpointed
        },
    )
    .map_err(|e| e.to_string())?;
    if resumed.chunks_resumed != 4 || resumed.value.value.to_bits() != reference.value.value.to_bits() {
        return Err(format!("resume mismatch: {} chunks resumed, {} vs {}", resumed.chunks_resumed, resumed.value.value, reference.value.value));
    }

    let stats = s_set_visit(2, 0.75, false, DEFAULT_MAX_S_NODES, |_| {}).map_err(|e| e.to_string())?;
    if stats.count != 71_678_431 {
        return Err(format!("#S_(2, 0.75) over all n = {}", stats.count));
    }
    Ok("N = 1e9 accepted, resume bit-identical, #S_(2, 0.75) = 71678431".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 alpha table", alpha_table),
        ("2 alpha at N = 1e8", alpha_large_n),
        ("3 beta error formula", beta_error_formula),
        ("4 beta main terms", beta_main_terms),
        ("5 certified lambda", certified_lambda),
        ("6 means", means),
        ("7 property suites", property_suites),
        ("8 full-scale config and resume", full_scale_and_resume),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
