//! Command-line front end.
//!
//! Every subcommand writes CSV or JSON to stdout and diagnostics to stderr.
//! Exit codes: 0 success, 1 usage or validation error, 2 numeric failure,
//! 3 I/O error. Floats are printed in shortest round-trip form, so outputs
//! are byte-identical across runs.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::asymptotics::{self, RegularVariationModel, ScanReport, SlowlyVarying, DEFAULT_SETTLE_TOL};
use crate::error::{Error, Result};
use crate::fejer::{sandwich, variance_spectral_many};
use crate::gallery;
use crate::measure::SpectralMeasure;
use crate::simulate::{self, BatchMeta};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "specvar",
    version,
    about = "Variance of partial sums from a spectral measure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct MeasureArg {
    /// `gallery:<name>[:<k>=<v>,...]` or `file:<path.json>`
    #[arg(long)]
    measure: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CSV `n,variance`
    Variance {
        #[command(flatten)]
        measure: MeasureArg,
        /// `1,2,4`, `a:b:step` or `dyadic:r0:r1`
        #[arg(long)]
        n: String,
    },
    /// CSV `n,lower,variance,upper`
    Bounds {
        #[command(flatten)]
        measure: MeasureArg,
        #[arg(long)]
        n: String,
        #[arg(long = "A", default_value_t = 1.0)]
        a: f64,
    },
    /// Var(S_n) and G(1/n) against the model K0 n^gamma L(n)
    Scan {
        #[command(flatten)]
        measure: MeasureArg,
        #[arg(long)]
        gamma: f64,
        #[arg(long = "K0")]
        k0: Option<f64>,
        #[arg(long = "L", default_value = "const")]
        l: String,
        #[arg(long = "n-range")]
        n_range: String,
        #[arg(long, default_value_t = DEFAULT_SETTLE_TOL)]
        tol: f64,
        /// `csv` or `json`
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// CSV `gamma,C,D,quad_identity_residual`
    Constants {
        /// comma-separated values in (0, 2)
        #[arg(long)]
        gamma: String,
    },
    /// Log-log fit of a CSV with `n` and `variance` columns
    Estimate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Gaussian paths and Monte Carlo checks of Var(S_n)
    Simulate {
        #[command(flatten)]
        measure: MeasureArg,
        #[arg(long = "N")]
        len: usize,
        #[arg(long)]
        paths: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long = "check-n")]
        check_n: Option<String>,
        /// also write the paths as CSV `path,t,value`
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Gallery measures
    Gallery {
        #[command(subcommand)]
        action: GalleryAction,
    },
}

#[derive(Subcommand, Debug)]
enum GalleryAction {
    /// Names and one-line descriptions
    List,
}

/// Parses `gallery:<name>[:<k>=<v>,...]` or `file:<path.json>`.
pub fn parse_measure(spec: &str) -> Result<SpectralMeasure> {
    if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path)?;
        return SpectralMeasure::from_json(&text);
    }
    let Some(rest) = spec.strip_prefix("gallery:") else {
        return Err(Error::validation(
            "--measure",
            format!("expected `gallery:<name>[:k=v,...]` or `file:<path>`, got `{spec}`"),
        ));
    };
    let (name, params) = match rest.split_once(':') {
        Some((name, params)) => (name, params),
        None => (rest, ""),
    };
    let params = params
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::validation("--measure", format!("parameter `{p}` is not `key=value`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::validation("--measure", format!("parameter `{k}` has non-numeric value `{v}`")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect::<Result<Vec<_>>>()?;
    gallery::by_name(name, &params)
}

fn parse_u64(text: &str, what: &str) -> Result<u64> {
    text.trim()
        .parse()
        .map_err(|_| Error::validation(what, format!("`{text}` is not a nonnegative integer")))
}

/// Parses `1,2,4`, `a:b:step` (inclusive) or `dyadic:r0:r1`.
pub fn parse_n_list(text: &str, what: &str) -> Result<Vec<u64>> {
    let ns: Vec<u64> = if let Some(rest) = text.strip_prefix("dyadic:") {
        let (r0, r1) = rest
            .split_once(':')
            .ok_or_else(|| Error::validation(what, "expected `dyadic:r0:r1`"))?;
        let (r0, r1) = (parse_u64(r0, what)?, parse_u64(r1, what)?);
        if r0 > r1 || r1 > 40 {
            return Err(Error::validation(what, format!("need r0 <= r1 <= 40, got {r0}:{r1}")));
        }
        (r0..=r1).map(|r| 1u64 << r).collect()
    } else if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::validation(what, "expected `a:b:step`"));
        }
        let (a, b, step) = (
            parse_u64(parts[0], what)?,
            parse_u64(parts[1], what)?,
            parse_u64(parts[2], what)?,
        );
        if step == 0 || a > b {
            return Err(Error::validation(what, format!("empty range `{text}`")));
        }
        (a..=b).step_by(step as usize).collect()
    } else {
        text.split(',').map(|s| parse_u64(s, what)).collect::<Result<_>>()?
    };
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::validation(what, "n values must be positive"));
    }
    Ok(ns)
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(what, format!("`{s}` is not a number")))
        })
        .collect()
}

/// (n, variance) pairs from a CSV whose header names `n` and `variance` columns.
pub fn read_variance_csv(text: &str) -> Result<Vec<(u64, f64)>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::validation("--input", "empty file"))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::validation("--input", format!("missing `{name}` column")))
    };
    let (ni, vi) = (col("n")?, col("variance")?);
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            let path = format!("--input line {}", i + 2);
            let cell = |j: usize| {
                cells
                    .get(j)
                    .copied()
                    .ok_or_else(|| Error::validation(path.clone(), "short row"))
            };
            let n = parse_u64(cell(ni)?, &path)?;
            let v: f64 = cell(vi)?
                .trim()
                .parse()
                .map_err(|_| Error::validation(path.clone(), "variance is not a number"))?;
            Ok((n, v))
        })
        .collect()
}

#[derive(Serialize)]
struct VarianceCheck {
    n: usize,
    estimate: f64,
    standard_error: f64,
    spectral: f64,
    /// |estimate − spectral| / standard_error
    z: f64,
}

#[derive(Serialize)]
struct SimulateReport {
    #[serde(flatten)]
    meta: BatchMeta,
    checks: Vec<VarianceCheck>,
}

fn execute(cli: Cli) -> Result<String> {
    let mut out = String::new();
    match cli.command {
        Command::Variance { measure, n } => {
            let m = parse_measure(&measure.measure)?;
            let ns = parse_n_list(&n, "--n")?;
            let vs = variance_spectral_many(&m, &ns)?;
            out.push_str("n,variance\n");
            for (n, v) in ns.iter().zip(vs) {
                let _ = writeln!(out, "{n},{v}");
            }
        }
        Command::Bounds { measure, n, a } => {
            let m = parse_measure(&measure.measure)?;
            let ns = parse_n_list(&n, "--n")?;
            out.push_str("n,lower,variance,upper\n");
            for n in ns {
                let b = sandwich(&m, n, a)?;
                let _ = writeln!(out, "{},{},{},{}", b.n, b.lower, b.variance, b.upper);
            }
        }
        Command::Scan {
            measure,
            gamma,
            k0,
            l,
            n_range,
            tol,
            format,
        } => {
            let m = parse_measure(&measure.measure)?;
            let ns = parse_n_list(&n_range, "--n-range")?;
            let l = SlowlyVarying::parse(&l)?;
            if !(0.0..=2.0).contains(&gamma) {
                return Err(Error::validation(
                    "--gamma",
                    format!("gamma must lie in [0, 2], got {gamma}"),
                ));
            }
            let model = k0.map(|k0| RegularVariationModel::new(gamma, k0, l)).transpose()?;
            let report: ScanReport = asymptotics::scan(&m, model, &ns, tol)?;
            match format.as_str() {
                "csv" => out.push_str(&report.to_csv()),
                "json" => {
                    out.push_str(&report.to_json());
                    out.push('\n');
                }
                other => {
                    return Err(Error::validation(
                        "--format",
                        format!("expected csv or json, got `{other}`"),
                    ))
                }
            }
        }
        Command::Constants { gamma } => {
            out.push_str("gamma,C,D,quad_identity_residual\n");
            for g in parse_f64_list(&gamma, "--gamma")? {
                let c = asymptotics::c_gamma(g)?;
                let d = asymptotics::d_gamma(g)?;
                let res = asymptotics::quad_identity_residual(g)?;
                let _ = writeln!(out, "{g},{c},{d},{res}");
            }
        }
        Command::Estimate { input } => {
            let text = std::fs::read_to_string(&input)?;
            let fit = asymptotics::gamma_fit(&read_variance_csv(&text)?)?;
            out.push_str(&serde_json::to_string_pretty(&fit).expect("fit serializes"));
            out.push('\n');
        }
        Command::Simulate {
            measure,
            len,
            paths,
            seed,
            check_n,
            csv,
        } => {
            let m = parse_measure(&measure.measure)?;
            let check_n = match check_n {
                Some(text) => parse_n_list(&text, "--check-n")?,
                None => Vec::new(),
            };
            let batch = simulate::simulate(&m, len, paths, seed)?;
            let spectral = variance_spectral_many(&m, &check_n)?;
            let checks = check_n
                .iter()
                .zip(spectral)
                .map(|(&n, spectral)| {
                    let (estimate, standard_error) = simulate::empirical_variance(&batch, n as usize)?;
                    Ok(VarianceCheck {
                        n: n as usize,
                        estimate,
                        standard_error,
                        spectral,
                        z: (estimate - spectral).abs() / standard_error,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(path) = csv {
                std::fs::write(path, batch.to_csv())?;
            }
            let report = SimulateReport {
                meta: batch.meta(),
                checks,
            };
            // non-finite values (P = 1) serialize as null
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            out.push_str(&json);
            out.push('\n');
        }
        Command::Gallery {
            action: GalleryAction::List,
        } => {
            for (name, description) in gallery::CATALOGUE {
                let _ = writeln!(out, "{name}\t{description}");
            }
        }
    }
    Ok(out)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Validation { .. } => EXIT_USAGE,
        Error::Numeric { .. } | Error::Embedding(_) => EXIT_NUMERIC,
        Error::Io(_) => EXIT_IO,
    }
}

fn thread_count() -> Option<usize> {
    std::env::var("SPECVAR_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs the CLI on `argv` (without the program name), writing to the given
/// streams, and returns the exit code.
pub fn run_with<O: Write, E: Write>(argv: &[String], stdout: &mut O, stderr: &mut E) -> i32 {
    let cli = match Cli::try_parse_from(std::iter::once("specvar".to_string()).chain(argv.iter().cloned())) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        builder = builder.num_threads(n);
    }
    let result = match builder.build() {
        Ok(pool) => pool.install(|| execute(cli)),
        Err(_) => execute(cli),
    };
    match result {
        Ok(text) => match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_IO
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs the CLI against the process's stdout and stderr.
pub fn run(argv: &[String]) -> i32 {
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
