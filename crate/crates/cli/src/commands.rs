use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use binorbit_core::blocks::decompose;
use binorbit_core::checks::{
    verify_dual_bound, verify_lambda_equivalence, verify_lemma_bounds, verify_prefix_inequalities, verify_sandwich,
    verify_theorem3_divergence, verify_theorem6_boundedness, verify_upsilon_bound, Analysis, CheckReport,
    SandwichOptions,
};
use binorbit_core::normality::{frequency_trend, pattern_counts, strictly_decreasing, theorem4_diagnostics};
use binorbit_core::orbit::Exponent;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Serialize;

use crate::config::{open_stream, parse_epsilon, parse_exponent, parse_p_list, parse_schedule, RunConfig};
use crate::error::{error_json, CliError};
use crate::numfmt::ratio_text;
use crate::output::{rows, write_checks_csv, write_csv, write_json, Report};

#[derive(Parser, Debug)]
#[command(name = "binorbit", version, about = "Orbit sums of the doubling map with rigorous enclosures")]
struct Cli {
    /// Print errors to stderr as a JSON object.
    #[arg(long, global = true)]
    error_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the first digits of a stream as ASCII bits.
    Generate(GenerateArgs),
    /// Prefix sums, averages and estimators at checkpoints.
    Analyze(AnalyzeArgs),
    /// Run the inequality checks and report pass/fail.
    Verify(VerifyArgs),
    /// Digit frequencies, pattern counts and block ratios.
    Normality(NormalityArgs),
    /// `verify` over every spec and exponent combination.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct StreamArgs {
    /// Stream description, e.g. `rational:1/3` or `blocks:cycle=[(1,1)]`.
    #[arg(long)]
    spec: String,
    /// Longest run of equal digits accepted from sources without declared runs.
    #[arg(long)]
    guard: Option<u64>,
}

#[derive(Args, Debug)]
struct OrbitArgs {
    /// Exponent, integer or `a/b`.
    #[arg(long)]
    p: String,
    #[arg(long)]
    n_max: u64,
    /// Target relative width, `2^-k`.
    #[arg(long, default_value = "2^-40")]
    epsilon: String,
    /// Largest term magnitude in bits.
    #[arg(long)]
    bit_budget: Option<u64>,
    /// Read digit windows even when the exact value is known.
    #[arg(long)]
    digits_only: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[arg(long)]
    digits: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[command(flatten)]
    orbit: OrbitArgs,
    #[arg(long, default_value = "log")]
    schedule: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug, Clone)]
struct CheckArgs {
    /// Comma-separated checks, or `default` / `all`.
    #[arg(long, default_value = "default")]
    checks: String,
    /// Bound for the bounded-average check (integer or `a/b`).
    #[arg(long)]
    bound: Option<String>,
    /// Checkpoints for the divergence check; defaults to powers of ten.
    #[arg(long, value_delimiter = ',')]
    decades: Option<Vec<u64>>,
    #[arg(long, default_value = "blocks")]
    schedule: String,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[command(flatten)]
    orbit: OrbitArgs,
    #[command(flatten)]
    checks: CheckArgs,
}

#[derive(Args, Debug)]
struct NormalityArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[arg(long)]
    n_max: usize,
    #[arg(long, default_value_t = 2)]
    pattern_length: usize,
    /// Block index for the block-ratio diagnostics; defaults to the last complete block.
    #[arg(long)]
    block: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Repeat for each stream.
    #[arg(long = "spec", required = true)]
    specs: Vec<String>,
    #[arg(long)]
    guard: Option<u64>,
    #[arg(long)]
    p_list: String,
    #[arg(long)]
    n_max: u64,
    #[arg(long, default_value = "2^-40")]
    epsilon: String,
    #[arg(long)]
    bit_budget: Option<u64>,
    #[arg(long)]
    digits_only: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    checks: CheckArgs,
}

/// Exit code: 0 success, 1 a check failed, 2 usage or input error.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with_io<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let want_json = args.iter().any(|a| a == "--error-json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(stdout, "{e}");
            } else if want_json {
                let _ = writeln!(stderr, "{}", error_json("usage", e.to_string().trim(), code));
            } else {
                let _ = write!(stderr, "{e}");
            }
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(pass) => i32::from(!pass),
        Err(e) => {
            if cli.error_json {
                let _ = writeln!(stderr, "{}", error_json(e.kind(), &e.to_string(), 2));
            } else {
                let _ = writeln!(stderr, "error: {e}");
            }
            2
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<bool, CliError> {
    match command {
        Command::Generate(a) => generate(a, stdout).map(|_| true),
        Command::Analyze(a) => analyze(a, stdout).map(|_| true),
        Command::Verify(a) => verify(a, stdout),
        Command::Normality(a) => normality(a, stdout).map(|_| true),
        Command::Sweep(a) => sweep(a, stdout),
    }
}

/// Runs `f` against `--out` if given, else stdout.
fn with_output<F>(out: Option<&Path>, stdout: &mut dyn Write, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn run_config(stream: &StreamArgs, orbit: &OrbitArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::new(&stream.spec, parse_exponent(&orbit.p)?, orbit.n_max)?;
    cfg.eps_bits = parse_epsilon(&orbit.epsilon)?;
    cfg.guard = stream.guard;
    cfg.out = orbit.out.clone();
    cfg.exact_periodic = !orbit.digits_only;
    if let Some(b) = orbit.bit_budget {
        cfg.bit_budget = b;
    }
    Ok(cfg)
}

fn generate(a: GenerateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = binorbit_core::streamspec::parse_spec(&a.stream.spec)?;
    let mut stream = open_stream(&spec, a.stream.guard)?;
    let prefix = stream.materialize(a.digits)?;
    let text: String = prefix.iter().map(|b| if b == 1 { '1' } else { '0' }).collect();
    with_output(a.out.as_deref(), stdout, |w| {
        writeln!(w, "{text}")?;
        Ok(())
    })
}

#[derive(Serialize)]
struct AnalyzeJson<'a> {
    spec: String,
    p: String,
    n_max: u64,
    epsilon: String,
    schedule: &'static str,
    rows: &'a [crate::output::Row],
}

fn analyze(a: AnalyzeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = run_config(&a.stream, &a.orbit)?;
    cfg.schedule = parse_schedule(&a.schedule)?;
    let mut stream = cfg.open_stream()?;
    let analysis = Analysis::run(&mut stream, &cfg.orbit_config(), cfg.n_max, cfg.schedule)?;
    let rows = rows(&analysis);
    with_output(cfg.out.as_deref(), stdout, |w| match a.format {
        Format::Csv => write_csv(w, &rows),
        Format::Json => write_json(
            w,
            &AnalyzeJson {
                spec: cfg.spec.to_string(),
                p: cfg.p.to_string(),
                n_max: cfg.n_max,
                epsilon: cfg.epsilon_text(),
                schedule: cfg.schedule.as_str(),
                rows: &rows,
            },
        ),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum CheckKind {
    Lemma,
    Prefix,
    Sandwich,
    Dual,
    Upsilon,
    Lambda,
    Divergence,
    Boundedness,
}

const DEFAULT_CHECKS: [CheckKind; 6] =
    [CheckKind::Lemma, CheckKind::Prefix, CheckKind::Sandwich, CheckKind::Dual, CheckKind::Upsilon, CheckKind::Lambda];

fn parse_checks(text: &str) -> Result<Vec<CheckKind>, CliError> {
    let mut out = Vec::new();
    for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "default" => out.extend(DEFAULT_CHECKS),
            "all" => out.extend(DEFAULT_CHECKS.into_iter().chain([CheckKind::Divergence, CheckKind::Boundedness])),
            "lemma" => out.push(CheckKind::Lemma),
            "prefix" => out.push(CheckKind::Prefix),
            "sandwich" => out.push(CheckKind::Sandwich),
            "dual" => out.push(CheckKind::Dual),
            "upsilon" => out.push(CheckKind::Upsilon),
            "lambda" => out.push(CheckKind::Lambda),
            "divergence" => out.push(CheckKind::Divergence),
            "boundedness" => out.push(CheckKind::Boundedness),
            other => return Err(CliError::Usage(format!("unknown check {other:?}"))),
        }
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(CliError::Usage("no checks selected".into()));
    }
    Ok(out)
}

/// `10^2, 10^3, ...` up to `n_max`.
fn default_decades(n_max: u64) -> Vec<u64> {
    std::iter::successors(Some(100u64), |d| d.checked_mul(10)).take_while(|&d| d <= n_max).collect()
}

fn run_checks(cfg: &RunConfig, args: &CheckArgs) -> Result<Report, CliError> {
    let kinds = parse_checks(&args.checks)?;
    let schedule = parse_schedule(&args.schedule)?;
    let bound: Option<BigRational> = match &args.bound {
        Some(text) => Some(text.trim().parse().map_err(|_| CliError::Usage(format!("bad bound {text:?}")))?),
        None => None,
    };
    let ocfg = cfg.orbit_config();
    let mut stream = cfg.open_stream()?;
    let needs_analysis = kinds
        .iter()
        .any(|k| matches!(k, CheckKind::Prefix | CheckKind::Sandwich | CheckKind::Upsilon | CheckKind::Lambda));
    let analysis = if needs_analysis { Some(Analysis::run(&mut stream, &ocfg, cfg.n_max, schedule)?) } else { None };
    let mut reports: Vec<CheckReport> = Vec::new();
    for kind in kinds {
        let report = match kind {
            CheckKind::Lemma => verify_lemma_bounds(&mut stream, &ocfg, cfg.n_max)?,
            CheckKind::Prefix => verify_prefix_inequalities(analysis.as_ref().expect("analysis")),
            CheckKind::Sandwich => verify_sandwich(analysis.as_ref().expect("analysis"), SandwichOptions::default())?.0,
            CheckKind::Dual => verify_dual_bound(&mut stream, &ocfg, cfg.n_max, schedule)?,
            CheckKind::Upsilon => verify_upsilon_bound(analysis.as_ref().expect("analysis"))?,
            CheckKind::Lambda => verify_lambda_equivalence(analysis.as_ref().expect("analysis"), false)?.0,
            CheckKind::Divergence => {
                let decades = args.decades.clone().unwrap_or_else(|| default_decades(cfg.n_max));
                if decades.len() < 2 || decades.windows(2).any(|w| w[0] >= w[1]) || decades[0] == 0 {
                    return Err(CliError::Usage(
                        "divergence needs at least two increasing positive checkpoints".into(),
                    ));
                }
                verify_theorem3_divergence(&mut stream, &ocfg, &decades)?
            }
            CheckKind::Boundedness => {
                verify_theorem6_boundedness(&mut stream, &ocfg, cfg.n_max, bound.as_ref())?.report
            }
        };
        reports.push(report);
    }
    Ok(Report::new(cfg.spec.to_string(), cfg.p.to_string(), cfg.n_max, cfg.epsilon_text(), &reports))
}

fn verify(a: VerifyArgs, stdout: &mut dyn Write) -> Result<bool, CliError> {
    let cfg = run_config(&a.stream, &a.orbit)?;
    let report = run_checks(&cfg, &a.checks)?;
    with_output(cfg.out.as_deref(), stdout, |w| match a.checks.format {
        Format::Json => write_json(w, &report),
        Format::Csv => write_checks_csv(w, &report),
    })?;
    Ok(report.pass)
}

#[derive(Serialize)]
struct SweepJson {
    runs: Vec<Report>,
    pass: bool,
}

fn sweep(a: SweepArgs, stdout: &mut dyn Write) -> Result<bool, CliError> {
    let ps: Vec<Exponent> = parse_p_list(&a.p_list)?;
    let eps_bits = parse_epsilon(&a.epsilon)?;
    let mut runs = Vec::new();
    for spec in &a.specs {
        for &p in &ps {
            let mut cfg = RunConfig::new(spec, p, a.n_max)?;
            cfg.eps_bits = eps_bits;
            cfg.guard = a.guard;
            cfg.exact_periodic = !a.digits_only;
            if let Some(b) = a.bit_budget {
                cfg.bit_budget = b;
            }
            runs.push(run_checks(&cfg, &a.checks)?);
        }
    }
    let pass = runs.iter().all(|r| r.pass);
    with_output(a.out.as_deref(), stdout, |w| match a.checks.format {
        Format::Json => write_json(w, &SweepJson { runs, pass }),
        Format::Csv => {
            let mut buf = Vec::new();
            for (i, r) in runs.iter().enumerate() {
                let mut part = Vec::new();
                write_checks_csv(&mut part, r)?;
                // Keep a single header line across runs.
                let skip = if i == 0 { 0 } else { part.iter().position(|&b| b == b'\n').map_or(0, |p| p + 1) };
                buf.extend_from_slice(&part[skip..]);
            }
            w.write_all(&buf)?;
            Ok(())
        }
    })?;
    Ok(pass)
}

#[derive(Serialize)]
struct FrequencyJson {
    n: u64,
    zeros: u64,
    ones: u64,
    deviation: String,
    deviation_f64: f64,
}

#[derive(Serialize)]
struct DiagnosticsJson {
    j: u64,
    ratio_lm: String,
    ratio_l: String,
    ratio_m: String,
}

#[derive(Serialize)]
struct NormalityJson {
    spec: String,
    n_max: usize,
    frequencies: Vec<FrequencyJson>,
    deviation_strictly_decreasing: bool,
    pattern_length: usize,
    pattern_counts: BTreeMap<String, u64>,
    m0: u64,
    complete_blocks: u64,
    diagnostics: Option<DiagnosticsJson>,
}

fn normality(a: NormalityArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if a.n_max == 0 {
        return Err(CliError::Usage("--n-max must be at least 1".into()));
    }
    let r = a.pattern_length;
    if r == 0 || r > binorbit_core::normality::MAX_PATTERN_LEN {
        return Err(CliError::Usage(format!(
            "--pattern-length must be in 1..={}",
            binorbit_core::normality::MAX_PATTERN_LEN
        )));
    }
    let spec = binorbit_core::streamspec::parse_spec(&a.stream.spec)?;
    let mut stream = open_stream(&spec, a.stream.guard)?;
    let prefix = stream.materialize(a.n_max + r - 1)?;

    let mut checkpoints: Vec<usize> =
        std::iter::successors(Some(10usize), |d| d.checked_mul(10)).take_while(|&d| d < a.n_max).collect();
    checkpoints.push(a.n_max);
    let trend = frequency_trend(&prefix, &checkpoints).map_err(|e| CliError::Usage(e.to_string()))?;
    let frequencies = checkpoints
        .iter()
        .zip(&trend)
        .map(|(&n, (_, dev))| {
            let ones = prefix.count_ones(n);
            FrequencyJson {
                n: n as u64,
                zeros: n as u64 - ones,
                ones,
                deviation: ratio_text(dev),
                deviation_f64: *dev.numer() as f64 / *dev.denom() as f64,
            }
        })
        .collect();

    let counts = pattern_counts(&prefix, r, a.n_max).map_err(|e| CliError::Usage(e.to_string()))?;
    let pattern_counts = counts.iter().enumerate().map(|(i, &c)| (format!("{:0width$b}", i, width = r), c)).collect();

    let decomp = decompose(&prefix.truncated(a.n_max));
    let complete = decomp.block_count();
    let j = a.block.unwrap_or(complete);
    let diagnostics = if j >= 2 {
        let d = theorem4_diagnostics(&decomp, j).map_err(|e| CliError::Usage(e.to_string()))?;
        Some(DiagnosticsJson {
            j: d.j,
            ratio_lm: ratio_text(&d.ratio_lm),
            ratio_l: ratio_text(&d.ratio_l),
            ratio_m: ratio_text(&d.ratio_m),
        })
    } else {
        None
    };

    let doc = NormalityJson {
        spec: spec.to_string(),
        n_max: a.n_max,
        deviation_strictly_decreasing: strictly_decreasing(&trend),
        frequencies,
        pattern_length: r,
        pattern_counts,
        m0: decomp.m0(),
        complete_blocks: complete,
        diagnostics,
    };
    with_output(a.out.as_deref(), stdout, |w| write_json(w, &doc))
}
