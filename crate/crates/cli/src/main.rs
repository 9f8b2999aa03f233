#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lavrentiev::diagnostics::{self, SuiteSizes};
use lavrentiev::experiments::{
    self, apriori_alpha, build_example, log_spaced_desc, loglog_slope, rate_boundedness_violations,
    rows_to_csv, rows_to_text, sci, standard_deltas, TableOptions,
};
use lavrentiev::solver::{vi_residual_profile, vi_solve};
use lavrentiev::{ExampleKind, ExampleSpec, Grid, GridFunction, NoiseModel, SolverConfig};

const EXIT_INVARIANT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_USAGE: u8 = 64;

/// Relative `--output` paths are resolved against this directory when set.
const OUT_DIR_ENV: &str = "LAVRENTIEV_OUT_DIR";

const AFTER_HELP: &str = "\
Exit codes:
  0   success
  2   invariant failure (rate bounds, slope gates, a diagnostic suite)
  3   an iteration did not converge (partial output is still written)
  64  usage error (bad flag, unknown example, out-of-range parameter)

Parameter constraints:
  The step size mu must satisfy 0 < mu < 2 tau, where tau = kappa/(2 c0) is
  the cocoercivity constant, and alpha <= 1/mu - 1/(2 tau); then the
  fixed-point map contracts with factor 1 - mu alpha. Both examples use
  mu = kappa/2, which allows alpha <= 1/kappa.

Environment:
  LAVRENTIEV_OUT_DIR  base directory for relative --output paths

All numbers are printed in scientific notation with 4 significant digits.";

#[derive(Parser, Debug)]
#[command(
    name = "lavrentiev",
    version,
    about = "Lavrentiev-regularized variational inequalities for a coefficient identification problem",
    after_help = AFTER_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Noisy solves over nine noise levels with alpha = delta^(2/3).
    #[command(after_help = AFTER_HELP)]
    Table(TableArgs),
    /// Runs every property and diagnostic suite, one PASS/FAIL line each.
    #[command(after_help = AFTER_HELP)]
    Diagnostics(DiagnosticsArgs),
    /// Noise-free rate profile over log-spaced alphas with fitted slopes.
    #[command(after_help = AFTER_HELP)]
    Rates(RatesArgs),
    /// A single solve; writes `t,u` CSV and a summary line.
    #[command(after_help = AFTER_HELP)]
    Solve(SolveArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Test problem: example1 or example2.
    #[arg(long, default_value = "example1", value_parser = parse_example)]
    example: ExampleKind,
    /// Number of grid intervals N (at least 4).
    #[arg(long, default_value_t = 200, value_parser = parse_intervals)]
    n_intervals: usize,
    /// Master seed for noise and random samples.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the table here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Discrepancy constant c in the stopping rule ||u^{k+1} - u^k|| <= c delta.
    #[arg(long, default_value_t = SolverConfig::DEFAULT_STOP_C, value_parser = parse_positive)]
    stop_c: f64,
}

#[derive(Args, Debug)]
struct DiagnosticsArgs {
    #[command(flatten)]
    common: Common,
    /// Negative control: feed -F to the operator suites.
    #[arg(long, hide = true)]
    sign_flip: bool,
}

#[derive(Args, Debug)]
struct RatesArgs {
    #[command(flatten)]
    common: Common,
    /// Number of log-spaced alphas between 1e-1 and 1e-4 (at least 4).
    #[arg(long, default_value_t = 8, value_parser = parse_points)]
    points: usize,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Noise level delta >= 0; 0 solves with exact data.
    #[arg(long, allow_negative_numbers = true, value_parser = parse_nonnegative)]
    delta: f64,
    /// Regularization parameter; defaults to delta^(2/3) (required when delta = 0).
    #[arg(long, value_parser = parse_positive)]
    alpha: Option<f64>,
    /// Write the `t,u` CSV here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Discrepancy constant c in the stopping rule ||u^{k+1} - u^k|| <= c delta.
    #[arg(long, default_value_t = SolverConfig::DEFAULT_STOP_C, value_parser = parse_positive)]
    stop_c: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = SolverConfig::DEFAULT_MAX_ITERS, hide = true)]
    max_iters: usize,
}

fn parse_example(s: &str) -> Result<ExampleKind, String> {
    s.parse().map_err(|e: lavrentiev::Error| e.to_string())
}

fn parse_intervals(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n < 4 {
        return Err(format!("need at least 4 intervals, got {n}"));
    }
    Ok(n)
}

fn parse_points(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n < 4 {
        return Err(format!("a slope fit needs at least 4 points, got {n}"));
    }
    Ok(n)
}

fn parse_nonnegative(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(format!("must be a finite number >= 0, got {s}"));
    }
    Ok(x)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(format!("must be a finite number > 0, got {s}"));
    }
    Ok(x)
}

/// Failure of a command, mapped to an exit code in `main`.
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] lavrentiev::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_)
            | CliError::Core(lavrentiev::Error::InvalidConfig(_))
            | CliError::Core(lavrentiev::Error::Domain(_)) => EXIT_USAGE,
            _ => 1,
        }
    }
}

type CmdResult = Result<u8, CliError>;

fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(p) => {
            let p = resolve_output(p);
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|source| CliError::Io {
                    path: parent.display().to_string(),
                    source,
                })?;
            }
            fs::write(&p, text).map_err(|source| CliError::Io {
                path: p.display().to_string(),
                source,
            })
        }
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn example(common: &Common) -> Result<ExampleSpec, CliError> {
    Ok(build_example(common.example, Grid::new(common.n_intervals)?)?)
}

fn cmd_table(args: &TableArgs) -> CmdResult {
    let spec = example(&args.common)?;
    let opts = TableOptions {
        stop_c: args.stop_c,
        ..TableOptions::default()
    };
    let rows = experiments::run_table_with(&spec, &standard_deltas(), args.common.seed, opts)?;
    let text = match args.format {
        Format::Csv => rows_to_csv(&rows),
        Format::Text => rows_to_text(&rows),
    };
    emit(args.output.as_deref(), &text)?;
    let violations = rate_boundedness_violations(&rows);
    for v in &violations {
        eprintln!("invariant violated: {v}");
    }
    Ok(if violations.is_empty() { 0 } else { EXIT_INVARIANT })
}

/// Failing suites attach the offending sample, which can be hundreds of values.
const MAX_LINE: usize = 200;

fn clip(line: &str, max: usize) -> String {
    match line.char_indices().nth(max) {
        Some((i, _)) => format!("{} ...", &line[..i]),
        None => line.to_string(),
    }
}

fn cmd_diagnostics(args: &DiagnosticsArgs) -> CmdResult {
    let spec = example(&args.common)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}: kappa = {}, c0 = {}, tau = {}, mu = {}, max alpha = {}",
        spec.name(),
        sci(spec.kappa),
        sci(spec.c0),
        sci(spec.tau()),
        sci(spec.mu()),
        sci(SolverConfig::max_alpha(spec.mu(), spec.tau())),
    );
    let reports = diagnostics::run_all(&spec, SuiteSizes::default(), args.common.seed, args.sign_flip)?;
    for r in &reports {
        let _ = writeln!(out, "{}", clip(&r.to_string(), MAX_LINE));
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} of {} suites passed", reports.len() - failed, reports.len());
    emit(None, &out)?;
    Ok(if failed == 0 { 0 } else { EXIT_INVARIANT })
}

const ERROR_SLOPE_GATE: f64 = 0.45;
const RESIDUAL_SLOPE_GATE: f64 = 0.9;

fn cmd_rates(args: &RatesArgs) -> CmdResult {
    let spec = example(&args.common)?;
    let alphas = log_spaced_desc(1e-1, 1e-4, args.points);
    let base = spec
        .solver_config(alphas[0])?
        .with_max_iters(10 * SolverConfig::DEFAULT_MAX_ITERS);
    let profile = vi_residual_profile(
        &spec.operator(),
        &spec.set(),
        &spec.f_star,
        &spec.u_star,
        &alphas,
        &base,
    )?;
    let mut out = String::from("alpha,error_norm,residual_norm,iterations,converged\n");
    for p in &profile {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            sci(p.alpha),
            sci(p.error_norm),
            sci(p.residual_norm),
            p.iterations,
            p.converged
        );
    }
    let xs: Vec<f64> = profile.iter().map(|p| p.alpha).collect();
    let errs: Vec<f64> = profile.iter().map(|p| p.error_norm).collect();
    let res: Vec<f64> = profile.iter().map(|p| p.residual_norm).collect();
    let error_slope = loglog_slope(&xs, &errs)?;
    let residual_slope = loglog_slope(&xs, &res)?;
    let _ = writeln!(
        out,
        "error slope {} (gate >= {})",
        sci(error_slope),
        sci(ERROR_SLOPE_GATE)
    );
    let _ = writeln!(
        out,
        "residual slope {} (gate >= {})",
        sci(residual_slope),
        sci(RESIDUAL_SLOPE_GATE)
    );
    emit(None, &out)?;

    let stalled: Vec<_> = profile.iter().filter(|p| !p.converged).collect();
    for p in &stalled {
        eprintln!("solve for alpha = {} did not converge", sci(p.alpha));
    }
    if !stalled.is_empty() {
        return Ok(EXIT_NOT_CONVERGED);
    }
    let mut code = 0;
    if !(error_slope >= ERROR_SLOPE_GATE) {
        eprintln!("invariant violated: error slope {} below {}", sci(error_slope), sci(ERROR_SLOPE_GATE));
        code = EXIT_INVARIANT;
    }
    if !(residual_slope >= RESIDUAL_SLOPE_GATE) {
        eprintln!(
            "invariant violated: residual slope {} below {}",
            sci(residual_slope),
            sci(RESIDUAL_SLOPE_GATE)
        );
        code = EXIT_INVARIANT;
    }
    Ok(code)
}

fn solution_csv(u: &GridFunction) -> String {
    let mut s = String::from("t,u\n");
    for (k, v) in u.values().iter().enumerate() {
        let _ = writeln!(s, "{},{}", sci(u.grid().node(k)), sci(*v));
    }
    s
}

fn cmd_solve(args: &SolveArgs) -> CmdResult {
    let spec = example(&args.common)?;
    let alpha = match (args.alpha, args.delta) {
        (Some(a), _) => a,
        (None, d) if d > 0.0 => apriori_alpha(d)?,
        (None, _) => {
            return Err(CliError::Usage(
                "--alpha is required when --delta is 0".into(),
            ))
        }
    };
    let mut cfg = spec
        .solver_config(alpha)?
        .with_stop_c(args.stop_c)
        .with_max_iters(args.max_iters);
    let f_delta = if args.delta > 0.0 {
        cfg = cfg.with_delta(args.delta);
        experiments::add_noise(
            &spec.f_star,
            NoiseModel {
                delta: args.delta,
                seed: experiments::row_seed(args.common.seed, 0),
            },
        )?
    } else {
        spec.f_star.clone()
    };
    let res = vi_solve(&spec.operator(), &spec.set(), &f_delta, &cfg)?;
    let error = res.solution.distance(&spec.u_star)?;
    let summary = format!(
        "# example={} delta={} alpha={} iterations={} error={} error/sqrt(alpha)={} residual={} converged={}\n",
        spec.name(),
        sci(args.delta),
        sci(alpha),
        res.iterations,
        sci(error),
        sci(error / alpha.sqrt()),
        sci(res.residual_norm),
        res.converged
    );
    match &args.output {
        Some(p) => {
            emit(Some(p), &solution_csv(&res.solution))?;
            emit(None, &summary)?;
        }
        None => emit(None, &(solution_csv(&res.solution) + &summary))?,
    }
    if !res.converged {
        eprintln!(
            "iteration stopped after {} steps without meeting the tolerance",
            res.iterations
        );
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Table(a) => cmd_table(a),
        Command::Diagnostics(a) => cmd_diagnostics(a),
        Command::Rates(a) => cmd_rates(a),
        Command::Solve(a) => cmd_solve(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
