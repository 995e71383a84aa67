//! Command-line front end: JSON operators and measures in, CSV and JSON
//! reports out. Outputs are byte-stable for a fixed (config, seed,
//! version) triple; every document embeds a hash of its own config.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::classical::{kl_divergence, classical_psi, FiniteMeasure};
use crate::error::{Error, Result};
use crate::exponent::{stein_report, ClassicalPair};
use crate::operator::{DensityOperator, HermitianOperator, ProjectionMode};
use crate::quantum::{iid_projection_curve, quantum_psi, relative_entropy};
use crate::schur::build_decomposition;
use crate::selftest::{run_selftest, SelftestConfig};
use crate::source::source_report;
use crate::tolerance::DEFAULT_CAP;
use crate::TestEvaluation;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "infospec",
    version,
    about = "Information-spectrum rates, exponents, and error curves for hypothesis testing and source coding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Acceptance probability g(a) of the likelihood projection test
    /// across a threshold grid, with error columns.
    Gcurve(GcurveArgs),
    /// Relative entropy of a pair of states or measures.
    Divergence(PairArgs),
    /// Cumulant generating function of the log-likelihood ratio over a
    /// tilt grid.
    Psi(PsiArgs),
    /// Largest miss-constrained thresholds per blocklength against the
    /// divergence limit.
    Stein(SteinArgs),
    /// Classical error-exponent trade-offs and rate samples.
    Exponent(ExponentArgs),
    /// Fixed-length source-coding rates and exponents.
    Source(SourceArgs),
    /// Cross-route verification suite with seeded fuzzing.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Strict,
    Nonstrict,
}

impl From<Mode> for ProjectionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Strict => ProjectionMode::Strict,
            Mode::Nonstrict => ProjectionMode::Nonstrict,
        }
    }
}

#[derive(Args, Serialize)]
struct GridArgs {
    /// Left edge of the threshold grid.
    #[arg(long, allow_negative_numbers = true)]
    a_min: f64,
    /// Right edge of the threshold grid.
    #[arg(long, allow_negative_numbers = true)]
    a_max: f64,
    /// Grid points, endpoints included.
    #[arg(long, default_value_t = 81)]
    a_points: usize,
}

impl GridArgs {
    fn build(&self) -> Result<Vec<f64>> {
        linspace(self.a_min, self.a_max, self.a_points)
    }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::Input(format!("bad grid range [{lo}, {hi}]")));
    }
    if points == 0 || (points == 1 && lo < hi) {
        return Err(Error::Input(format!(
            "{points} grid points cannot cover [{lo}, {hi}]"
        )));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    grid[points - 1] = hi;
    Ok(grid)
}

#[derive(Args, Serialize)]
struct GcurveArgs {
    /// Null state rho, operator JSON file.
    #[arg(long, value_name = "FILE")]
    input_rho: PathBuf,
    /// Alternative state sigma, operator JSON file.
    #[arg(long, value_name = "FILE")]
    input_sigma: PathBuf,
    /// Blocklength, repeatable.
    #[arg(long = "n", value_name = "N", required = true)]
    n: Vec<u32>,
    #[command(flatten)]
    grid: GridArgs,
    /// Boundary handling of the projection test.
    #[arg(long, value_enum, default_value_t = Mode::Nonstrict)]
    mode: Mode,
    /// Append a brute-force comparison column (small blocklengths only).
    #[arg(long)]
    oracle: bool,
    /// Worker threads across grid points; 0 lets rayon pick.
    #[arg(long, default_value_t = 1)]
    #[serde(skip)]
    threads: usize,
    /// Ambient-dimension cap for brute-force tensor products.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    /// Output file; stdout when absent.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PairArgs {
    /// First input (operator or measure JSON).
    #[arg(long, value_name = "FILE")]
    input_rho: PathBuf,
    /// Second input, same kind as the first.
    #[arg(long, value_name = "FILE")]
    input_sigma: PathBuf,
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PsiArgs {
    /// First input (operator or measure JSON).
    #[arg(long, value_name = "FILE")]
    input_rho: PathBuf,
    /// Second input, same kind as the first.
    #[arg(long, value_name = "FILE")]
    input_sigma: PathBuf,
    /// Left edge of the tilt grid.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    theta_min: f64,
    /// Right edge of the tilt grid.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    theta_max: f64,
    /// Tilt grid points, endpoints included.
    #[arg(long, default_value_t = 41)]
    theta_points: usize,
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SteinArgs {
    /// Null measure, weights JSON file.
    #[arg(long, value_name = "FILE")]
    input_rho: PathBuf,
    /// Alternative measure, weights JSON file.
    #[arg(long, value_name = "FILE")]
    input_sigma: PathBuf,
    /// Miss probability budget in [0, 1).
    #[arg(long)]
    epsilon: f64,
    /// Blocklength, repeatable.
    #[arg(long = "n", value_name = "N", required = true)]
    n: Vec<u32>,
    /// Spectrum atom cap per blocklength.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ExponentArgs {
    /// Null measure, weights JSON file.
    #[arg(long, value_name = "FILE")]
    input_rho: PathBuf,
    /// Alternative measure, weights JSON file.
    #[arg(long, value_name = "FILE")]
    input_sigma: PathBuf,
    /// Type-II rate target, repeatable; emits the trade-off table.
    #[arg(long = "r", value_name = "RATE")]
    r: Vec<f64>,
    /// Left edge of a threshold grid; with --a-max switches to the
    /// rate-sample table.
    #[arg(long, allow_negative_numbers = true)]
    a_min: Option<f64>,
    /// Right edge of the threshold grid.
    #[arg(long, allow_negative_numbers = true)]
    a_max: Option<f64>,
    /// Grid points, endpoints included.
    #[arg(long, default_value_t = 81)]
    a_points: usize,
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SourceArgs {
    /// Source distribution, weights JSON file.
    #[arg(long, value_name = "FILE")]
    input_rho: PathBuf,
    /// Blocklength for fixed-length rates, repeatable.
    #[arg(long = "n", value_name = "N", required = true)]
    n: Vec<u32>,
    /// Error budget in [0, 1), repeatable.
    #[arg(long, value_name = "EPS", required = true)]
    epsilon: Vec<f64>,
    /// Coding rate above entropy for the exponent table, repeatable.
    #[arg(long = "r", value_name = "RATE")]
    r: Vec<f64>,
    /// Resolution of the spectral rate table.
    #[arg(long, default_value_t = 33)]
    a_points: usize,
    /// Spectrum atom cap per blocklength.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SelftestArgs {
    /// RNG seed for the fuzz checks.
    #[arg(long)]
    seed: u64,
    /// Classical fuzz case count; quantum fuzz runs a tenth.
    #[arg(long, default_value_t = 200)]
    fuzz_cases: usize,
    /// Resource cap; undersized caps skip checks instead of failing.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    /// Flip a sector weight in the fast path so equivalence checks fail.
    #[arg(long)]
    corrupt: bool,
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    out: Option<PathBuf>,
}

enum StateInput {
    Quantum(DensityOperator),
    Classical(FiniteMeasure),
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_state(path: &Path) -> Result<StateInput> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("dim").is_some() {
        let op = HermitianOperator::from_json_str(&text)?;
        Ok(StateInput::Quantum(DensityOperator::new(op)?))
    } else if value.get("weights").is_some() {
        Ok(StateInput::Classical(FiniteMeasure::from_json_str(&text)?))
    } else {
        Err(Error::Input(format!(
            "{}: expected operator JSON with \"dim\" or measure JSON with \"weights\"",
            path.display()
        )))
    }
}

fn load_density_pair(rho: &Path, sigma: &Path) -> Result<(DensityOperator, DensityOperator)> {
    match (load_state(rho)?, load_state(sigma)?) {
        (StateInput::Quantum(r), StateInput::Quantum(s)) => Ok((r, s)),
        _ => Err(Error::Input(
            "this command needs operator JSON inputs for both states".into(),
        )),
    }
}

fn load_measure_pair(rho: &Path, sigma: &Path) -> Result<(FiniteMeasure, FiniteMeasure)> {
    match (load_state(rho)?, load_state(sigma)?) {
        (StateInput::Classical(r), StateInput::Classical(s)) => Ok((r, s)),
        _ => Err(Error::Input(
            "this command needs measure JSON inputs for both distributions".into(),
        )),
    }
}

fn load_measure(path: &Path) -> Result<FiniteMeasure> {
    match load_state(path)? {
        StateInput::Classical(m) => Ok(m),
        StateInput::Quantum(_) => Err(Error::Input(format!(
            "{}: this command needs a measure JSON input",
            path.display()
        ))),
    }
}

fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex::encode(&hasher.finalize()[..8]))
}

/// 17 significant digits, round-trip exact for binary64.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_document(hash: &str, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut doc = String::with_capacity(64 + rows.len() * 24 * columns.len());
    let _ = writeln!(doc, "# infospec {VERSION} config {hash}");
    let _ = writeln!(doc, "{}", columns.join(","));
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let _ = writeln!(doc, "{}", row.join(","));
    }
    doc
}

fn json_document<C: Serialize, P: Serialize>(config: &C, hash: &str, report: &P) -> Result<String> {
    let doc = serde_json::json!({
        "version": VERSION,
        "config_hash": hash,
        "config": serde_json::to_value(config)?,
        "report": serde_json::to_value(report)?,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn curve_rows(
    n: u32,
    grid: &[f64],
    points: &[(f64, TestEvaluation)],
    oracle: Option<&[f64]>,
    rows: &mut Vec<Vec<String>>,
) {
    debug_assert_eq!(points.len(), grid.len());
    for (i, (a, eval)) in points.iter().enumerate() {
        let g = 1.0 - eval.alpha;
        let mut row = vec![
            n.to_string(),
            fmt(*a),
            fmt(g),
            fmt(eval.alpha),
            fmt(eval.beta),
            fmt(eval.beta.log10()),
        ];
        if let Some(col) = oracle {
            row.push(fmt(col[i]));
        }
        rows.push(row);
    }
}

fn cmd_gcurve(args: &GcurveArgs) -> Result<String> {
    let (rho, sigma) = load_density_pair(&args.input_rho, &args.input_sigma)?;
    let grid = args.grid.build()?;
    let mode: ProjectionMode = args.mode.into();
    let hash = config_hash(args)?;
    let mut ns = args.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| Error::Input(format!("thread pool: {e}")))?;
    let qubits = rho.dim() == 2 && sigma.dim() == 2;
    let mut rows = Vec::with_capacity(ns.len() * grid.len());
    for &n in &ns {
        let points: Vec<(f64, TestEvaluation)> = if qubits {
            let dec = build_decomposition(&rho, &sigma, n)?;
            pool.install(|| {
                grid.par_iter()
                    .map(|&a| dec.evaluate(a, mode).map(|p| (p.a, p.eval)))
                    .collect::<Result<Vec<_>>>()
            })?
        } else {
            iid_projection_curve(&rho, &sigma, n, &grid, mode, Some(args.cap))
                .map_err(|e| match e {
                    Error::CapExceeded { needed, cap } => Error::Input(format!(
                        "blocklength {n} needs ambient dimension {needed} over the cap {cap}, \
                         and the fast path requires dim 2"
                    )),
                    other => other,
                })?
                .into_iter()
                .map(|p| (p.a, p.eval))
                .collect()
        };
        let oracle_col: Option<Vec<f64>> = if args.oracle {
            let brute = iid_projection_curve(&rho, &sigma, n, &grid, mode, Some(args.cap))?;
            Some(brute.into_iter().map(|p| 1.0 - p.eval.alpha).collect())
        } else {
            None
        };
        curve_rows(n, &grid, &points, oracle_col.as_deref(), &mut rows);
    }
    let mut columns = vec!["n", "a", "g", "alpha", "beta", "log10_beta"];
    if args.oracle {
        columns.push("g_brute");
    }
    Ok(csv_document(&hash, &columns, &rows))
}

fn cmd_divergence(args: &PairArgs) -> Result<String> {
    let hash = config_hash(args)?;
    let (kind, divergence, reverse) = match (load_state(&args.input_rho)?, load_state(&args.input_sigma)?)
    {
        (StateInput::Quantum(r), StateInput::Quantum(s)) => {
            ("quantum", relative_entropy(&r, &s)?, relative_entropy(&s, &r)?)
        }
        (StateInput::Classical(r), StateInput::Classical(s)) => {
            ("classical", kl_divergence(&r, &s)?, kl_divergence(&s, &r)?)
        }
        _ => {
            return Err(Error::Input(
                "inputs mix an operator with a measure".into(),
            ))
        }
    };
    let report = serde_json::json!({
        "kind": kind,
        "divergence": divergence,
        "reverse_divergence": reverse,
    });
    json_document(args, &hash, &report)
}

fn cmd_psi(args: &PsiArgs) -> Result<String> {
    let hash = config_hash(args)?;
    let grid = linspace(args.theta_min, args.theta_max, args.theta_points)?;
    let values: Vec<f64> = match (load_state(&args.input_rho)?, load_state(&args.input_sigma)?) {
        (StateInput::Quantum(r), StateInput::Quantum(s)) => grid
            .iter()
            .map(|&t| quantum_psi(&r, &s, t))
            .collect::<Result<_>>()?,
        (StateInput::Classical(r), StateInput::Classical(s)) => grid
            .iter()
            .map(|&t| classical_psi(&r, &s, t))
            .collect::<Result<_>>()?,
        _ => {
            return Err(Error::Input(
                "inputs mix an operator with a measure".into(),
            ))
        }
    };
    let rows: Vec<Vec<String>> = grid
        .iter()
        .zip(&values)
        .map(|(&t, &v)| vec![fmt(t), fmt(v)])
        .collect();
    Ok(csv_document(&hash, &["theta", "psi"], &rows))
}

fn cmd_stein(args: &SteinArgs) -> Result<String> {
    let hash = config_hash(args)?;
    let (rho, sigma) = load_measure_pair(&args.input_rho, &args.input_sigma)?;
    let mut ns = args.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let report = stein_report(&rho, &sigma, args.epsilon, &ns, Some(args.cap))?;
    json_document(args, &hash, &report)
}

fn cmd_exponent(args: &ExponentArgs) -> Result<String> {
    let hash = config_hash(args)?;
    let (rho, sigma) = load_measure_pair(&args.input_rho, &args.input_sigma)?;
    let pair = ClassicalPair::new(rho, sigma)?;
    match (args.a_min, args.a_max) {
        (Some(lo), Some(hi)) => {
            let grid = linspace(lo, hi, args.a_points)?;
            let samples = pair.rate_samples(&grid)?;
            let rows: Vec<Vec<String>> = (0..grid.len())
                .map(|i| {
                    vec![
                        fmt(samples.grid[i]),
                        fmt(samples.eta[i]),
                        fmt(samples.zeta[i]),
                        fmt(samples.zeta_c[i]),
                    ]
                })
                .collect();
            Ok(csv_document(&hash, &["a", "eta", "zeta", "zeta_c"], &rows))
        }
        (None, None) => {
            if args.r.is_empty() {
                return Err(Error::Input(
                    "pass --r for the trade-off table or --a-min/--a-max for rate samples".into(),
                ));
            }
            let mut rs = args.r.clone();
            rs.sort_by(f64::total_cmp);
            rs.dedup();
            let mut rows = Vec::with_capacity(rs.len());
            for &r in &rs {
                let hoeffding = pair.hoeffding_exponent(r)?;
                let hk = pair.han_kobayashi_exponent(r)?;
                rows.push(vec![fmt(r), fmt(hoeffding), fmt(hk)]);
            }
            Ok(csv_document(
                &hash,
                &["r", "hoeffding", "han_kobayashi"],
                &rows,
            ))
        }
        _ => Err(Error::Input(
            "--a-min and --a-max must be passed together".into(),
        )),
    }
}

fn cmd_source(args: &SourceArgs) -> Result<String> {
    let hash = config_hash(args)?;
    let p = load_measure(&args.input_rho)?;
    let mut ns = args.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let report = source_report(&p, &ns, &args.epsilon, &args.r, args.a_points, Some(args.cap))?;
    json_document(args, &hash, &report)
}

fn cmd_selftest(args: &SelftestArgs) -> Result<i32> {
    let cfg = SelftestConfig {
        seed: args.seed,
        fuzz_cases: args.fuzz_cases,
        cap: args.cap,
        corrupt: args.corrupt,
    };
    let report = run_selftest(&cfg);
    let hash = config_hash(args)?;
    let doc = json_document(args, &hash, &report)?;
    emit(&args.out, &doc)?;
    if report.all_passed() {
        Ok(0)
    } else {
        for check in &report.checks {
            if check.status == crate::selftest::CheckStatus::Fail {
                eprintln!("selftest: {} failed: {}", check.name, check.detail);
            }
        }
        Ok(3)
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gcurve(a) => {
            let doc = cmd_gcurve(&a)?;
            emit(&a.out, &doc)?;
            Ok(0)
        }
        Command::Divergence(a) => {
            let doc = cmd_divergence(&a)?;
            emit(&a.out, &doc)?;
            Ok(0)
        }
        Command::Psi(a) => {
            let doc = cmd_psi(&a)?;
            emit(&a.out, &doc)?;
            Ok(0)
        }
        Command::Stein(a) => {
            let doc = cmd_stein(&a)?;
            emit(&a.out, &doc)?;
            Ok(0)
        }
        Command::Exponent(a) => {
            let doc = cmd_exponent(&a)?;
            emit(&a.out, &doc)?;
            Ok(0)
        }
        Command::Source(a) => {
            let doc = cmd_source(&a)?;
            emit(&a.out, &doc)?;
            Ok(0)
        }
        Command::Selftest(a) => cmd_selftest(&a),
    }
}

fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => match dispatch(cli) {
            Ok(code) => code,
            Err(err) => {
                eprintln!("error: {err}");
                err.exit_code()
            }
        },
        Err(err) => {
            // help and version land here too; clap reports 0 for them
            let code = err.exit_code();
            let _ = err.print();
            code
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
