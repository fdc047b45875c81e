//! `alq`: certified bounds on the aliquot constant from the command line.
//!
//! Exit status: 0 on success, 1 for parameter or usage errors, 2 for
//! resource, effort, checkpoint and interruption errors (and failed self-tests).

mod settings;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use aliquot_core::aliquot::{trace, Classification, TrajectoryDocument};
use aliquot_core::alpha::{alpha_upper_bound, AlphaResult};
use aliquot_core::beta::{beta_lower, BetaJReport, MainTermMode};
use aliquot_core::lambda::{run_lambda, LambdaConfig, LambdaReport};
use aliquot_core::means::{mean_report, MeanClass, MeansDocument};
use aliquot_core::{selftest, Effort, Error, SCHEMA_VERSION};
use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use serde::Serialize;
use serde_json::json;

use settings::{parse_count, parse_u32, parse_usize, resolve, AlphaSettings, BetaSettings, LambdaSettings, MeansSettings, Overlay, TraceSettings};

#[derive(Debug, Parser)]
#[command(name = "alq", version, about = "Certified bounds on the aliquot constant")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Upper bound for alpha.
    Alpha(AlphaArgs),
    /// Lower bound for beta.
    Beta(BetaArgs),
    /// alpha, beta and their combination into lambda and mu.
    Lambda(LambdaArgs),
    /// Empirical arithmetic and logarithmic means of s(n)/n.
    Means(MeansArgs),
    /// Aliquot sequence from a starting value.
    Trace(TraceArgs),
    /// Oracle-based self checks.
    Selftest(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file (or a previous report); flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for JSON and CSV reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value = "0", value_parser = parse_usize)]
    workers: usize,
}

#[derive(Debug, Args)]
struct AlphaArgs {
    #[arg(long = "N", value_parser = parse_count)]
    n: Option<u64>,
    #[arg(long = "L", value_parser = parse_u32)]
    l: Option<u32>,
    #[arg(long = "M", value_parser = parse_u32)]
    m: Option<u32>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct BetaFlags {
    /// Cutoff N_j shared by every j (even).
    #[arg(long = "N", value_parser = parse_count)]
    n: Option<u64>,
    /// Number of j values; takes the first J entries of the e list.
    #[arg(long = "J", value_parser = parse_u32)]
    j: Option<u32>,
    /// Comma-separated e_j for j = 1, 2, ...
    #[arg(long, value_delimiter = ',')]
    e: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_u32)]
    k2: Option<u32>,
    /// factorized or direct.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<MainTermMode>,
    #[arg(long, value_parser = parse_count)]
    block_size: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    blocks_per_chunk: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    max_s_nodes: Option<u64>,
    /// Directory for resumable checkpoints.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Stop after computing this many new checkpoint chunks.
    #[arg(long, value_parser = parse_usize)]
    stop_after_chunks: Option<usize>,
}

#[derive(Debug, Args)]
struct BetaArgs {
    #[command(flatten)]
    beta: BetaFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct LambdaArgs {
    /// Prime cutoff for alpha.
    #[arg(long = "alpha-N", value_parser = parse_count)]
    alpha_n: Option<u64>,
    #[arg(long = "L", value_parser = parse_u32)]
    l: Option<u32>,
    #[arg(long = "M", value_parser = parse_u32)]
    m: Option<u32>,
    #[command(flatten)]
    beta: BetaFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct MeansArgs {
    /// Comma-separated classes: all, even, odd.
    #[arg(long, value_delimiter = ',', value_parser = parse_class)]
    class: Option<Vec<MeanClass>>,
    /// Comma-separated cutoffs.
    #[arg(long = "N", value_delimiter = ',', value_parser = parse_count)]
    n: Option<Vec<u64>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct TraceArgs {
    /// Starting value (decimal, any size).
    start: Option<String>,
    #[arg(long, value_parser = parse_usize)]
    max_steps: Option<usize>,
    /// Rho iterations allowed per factorization.
    #[arg(long, value_parser = parse_count)]
    effort: Option<u64>,
    #[command(flatten)]
    common: Common,
}

fn parse_mode(s: &str) -> std::result::Result<MainTermMode, String> {
    match s {
        "factorized" => Ok(MainTermMode::Factorized),
        "direct" => Ok(MainTermMode::Direct),
        _ => Err(format!("unknown mode {s:?} (expected factorized or direct)")),
    }
}

fn parse_class(s: &str) -> std::result::Result<MeanClass, String> {
    MeanClass::from_str(s).map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_parameter_error() { 1 } else { 2 };
        let message = match &e {
            Error::Interrupted { .. } => format!("{e}; rerun with the same --checkpoint-dir to resume"),
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    schema_version: u32,
    verb: &'a str,
    config: &'a C,
    result: &'a R,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    std::fs::write(dir.join(name), contents).map_err(Error::from)?;
    Ok(())
}

/// Prints the JSON report and writes it (plus an optional CSV) under `--out`.
fn emit<C: Serialize, R: Serialize>(verb: &str, common: &Common, config: &C, result: &R, csv: Option<String>) -> CliResult<()> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        verb,
        config,
        result,
    };
    let text = serde_json::to_string_pretty(&env).map_err(Error::from)?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(Error::from(e).into()),
        _ => {}
    }
    if let Some(dir) = &common.out {
        write_file(dir, &format!("{verb}.json"), &text)?;
        if let Some(csv) = csv {
            write_file(dir, &format!("{verb}.csv"), &csv)?;
        }
    }
    Ok(())
}

fn alpha_csv(r: &AlphaResult) -> String {
    format!(
        "N,L,M,sums,error_radius,tail_total,upper_bound\n{},{},{},{:.13},{:e},{:.10e},{:.13}\n",
        r.params.n, r.params.l, r.params.m, r.sums.value, r.sums.error_radius, r.tail_total, r.upper_bound
    )
}

fn beta_csv(reports: &[BetaJReport]) -> String {
    let mut out = String::from("j,N_j,e,main_term,main_radius,s_set_size,s_correction,error_term,tail_bound,contribution_lower\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{:.12},{:e},{},{:e},{:e},{:e},{:.12}",
            r.config.j,
            r.config.n_j,
            r.config.e,
            r.main_term.value,
            r.main_term.error_radius,
            r.s_set_size,
            r.s_correction.value,
            r.error_term,
            r.tail_bound,
            r.contribution_lower
        );
    }
    out
}

fn beta_overlay(b: &BetaFlags) -> CliResult<Overlay> {
    Ok(Overlay::default()
        .set("N_j", b.n)
        .set("e", b.e.clone())
        .set("k2", b.k2)
        .set("mode", b.mode)
        .set("block_size", b.block_size)
        .set("blocks_per_chunk", b.blocks_per_chunk)
        .set("max_s_nodes", b.max_s_nodes))
}

/// Applies `--J` by truncating the e list.
fn apply_j(settings: &mut BetaSettings, j: Option<u32>) -> CliResult<()> {
    if let Some(j) = j {
        let j = j as usize;
        if j == 0 || j > settings.e.len() {
            return Err(Error::Parameter(format!("--J {j} needs 1 <= J <= {} (the length of the e list)", settings.e.len())).into());
        }
        settings.e.truncate(j);
    }
    Ok(())
}

fn cmd_alpha(a: AlphaArgs) -> CliResult<()> {
    let overlay = Overlay::default().set("N", a.n).set("L", a.l).set("M", a.m);
    let s: AlphaSettings = resolve(a.common.config.as_deref(), overlay.into_map())?;
    let r = alpha_upper_bound(&s.params()?, a.common.workers)?;
    emit("alpha", &a.common, &s, &r, Some(alpha_csv(&r)))
}

fn cmd_beta(a: BetaArgs) -> CliResult<()> {
    let mut s: BetaSettings = resolve(a.common.config.as_deref(), beta_overlay(&a.beta)?.into_map())?;
    apply_j(&mut s, a.beta.j)?;
    let configs = s.configs()?;
    let opts = s.options(a.common.workers, a.beta.checkpoint_dir.as_deref(), a.beta.stop_after_chunks)?;
    match beta_lower(&configs, &opts) {
        Ok(r) => emit("beta", &a.common, &s, &r, Some(beta_csv(&r.reports))),
        Err(Error::BetaAborted { j, source, partial }) => {
            let failure = Failure::from(*source);
            let partial_doc = json!({
                "aborted_at_j": j,
                "error": failure.message,
                "partial_reports": partial,
            });
            emit("beta", &a.common, &s, &partial_doc, Some(beta_csv(&partial)))?;
            Err(Failure {
                code: failure.code,
                message: format!("beta run aborted at j = {j}: {}", failure.message),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_lambda(a: LambdaArgs) -> CliResult<()> {
    let alpha = Overlay::default().set("N", a.alpha_n).set("L", a.l).set("M", a.m);
    let overlay = Overlay::default().nested("alpha", alpha).nested("beta", beta_overlay(&a.beta)?);
    let mut s: LambdaSettings = resolve(a.common.config.as_deref(), overlay.into_map())?;
    apply_j(&mut s.beta, a.beta.j)?;
    let config = LambdaConfig {
        alpha: s.alpha.params()?,
        beta: s.beta.configs()?,
    };
    let opts = s.beta.options(a.common.workers, a.beta.checkpoint_dir.as_deref(), a.beta.stop_after_chunks)?;
    eprintln!(
        "lambda: alpha N = {}, beta J = {} N_j = {}",
        config.alpha.n,
        config.beta.len(),
        s.beta.n_j
    );
    let r: LambdaReport = run_lambda(&config, &opts)?;
    let mut csv = String::from("quantity,value\n");
    let _ = writeln!(csv, "alpha_upper,{:.13}", r.alpha_result.upper_bound);
    let _ = writeln!(csv, "beta_lower,{:.13}", r.beta_result.lower_bound);
    let _ = writeln!(csv, "lambda_upper,{:.13}", r.lambda_upper);
    let _ = writeln!(csv, "mu_upper,{:.13}", r.mu_upper);
    emit("lambda", &a.common, &s, &r, Some(csv))
}

fn cmd_means(a: MeansArgs) -> CliResult<()> {
    let overlay = Overlay::default().set("classes", a.class).set("N", a.n);
    let s: MeansSettings = resolve(a.common.config.as_deref(), overlay.into_map())?;
    if s.classes.is_empty() || s.n.is_empty() {
        return Err(Error::Parameter("means needs at least one class and one N".into()).into());
    }
    let mut reports = Vec::new();
    for &class in &s.classes {
        for &n in &s.n {
            reports.push(mean_report(class, n, a.common.workers)?);
        }
    }
    let doc = MeansDocument::new(reports);
    let csv = doc.to_csv();
    emit("means", &a.common, &s, &doc, Some(csv))
}

fn cmd_trace(a: TraceArgs) -> CliResult<()> {
    let overlay = Overlay::default().set("start", a.start).set("max_steps", a.max_steps).set("effort", a.effort);
    let s: TraceSettings = resolve(a.common.config.as_deref(), overlay.into_map())?;
    let text = s.start.as_deref().ok_or_else(|| Error::Parameter("trace needs a starting value".into()))?;
    let start = BigUint::from_str(text.trim()).map_err(|_| Error::Parameter(format!("not a positive integer: {text:?}")))?;
    if start == BigUint::ZERO {
        return Err(Error::Parameter("the starting value must be positive".into()).into());
    }
    let effort = Effort::new(s.effort);
    let record = trace(&start, s.max_steps, effort)?;
    let exhausted = record.classification == Classification::EffortExhausted;
    let doc = TrajectoryDocument::new(record, s.max_steps, effort);
    emit("trace", &a.common, &s, &doc, None)?;
    if exhausted {
        return Err(Failure {
            code: 2,
            message: "factorization effort exhausted; raise --effort to continue".into(),
        });
    }
    Ok(())
}

fn cmd_selftest(common: Common) -> CliResult<()> {
    let outcomes = selftest::run_all();
    for o in &outcomes {
        eprintln!("[{}] {}: {}", if o.passed { "pass" } else { "FAIL" }, o.name, o.detail);
    }
    emit("selftest", &common, &json!({}), &outcomes, None)?;
    if outcomes.iter().all(|o| o.passed) {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            message: "self-test failures".into(),
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Alpha(a) => cmd_alpha(a),
        Command::Beta(a) => cmd_beta(a),
        Command::Lambda(a) => cmd_lambda(a),
        Command::Means(a) => cmd_means(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Selftest(c) => cmd_selftest(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("alq: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
