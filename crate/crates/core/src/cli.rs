//! The `carmichael` command line.
//!
//! Exit codes: 0 on success, 1 on domain errors (including forms that fail
//! verification and rejected certificates), 2 on usage errors.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;

use crate::estimate::{
    estimate_by_integral, estimate_by_sum_at, singular_constant, Boundary, EstimateRow,
    DEFAULT_CUTOFF,
};
use crate::forms::{
    construct_theorem_form, evaluate, expand_coefficients, family_ukl, family_wk, parse_list,
    verify_universal, CoefficientTuple, UniversalForm,
};
use crate::korselt::{carmichael_oracle, korselt_check, parse_certificate_line, KorseltOutcome};
use crate::primality::{build_wheel, default_wheel_primes, ResidueWheel};
use crate::search::{
    count_at_checkpoints, csv_header, load_checkpoint, save_checkpoint, scan_into, search_range, CountRow,
    SearchCheckpoint, SearchError, SearchOptions, DEFAULT_CHUNK,
};

#[derive(Debug, Parser)]
#[command(name = "carmichael", version, about = "Search universal forms for Carmichael numbers")]
struct Cli {
    /// Worker threads for searches (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Checkpoint file to resume from and update after every chunk.
    #[arg(long, global = true, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    /// U_{k,l}; needs --k and --l.
    Ukl,
    /// W_k; needs --k.
    Wk,
    /// Built from --tuple, with --k defaulting to the tuple length.
    Theorem,
    /// Given slopes --alphas and substitution --s.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Sum,
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundaryArg {
    /// Keep the boundary terms at both limits.
    Full,
    /// Keep only the upper-limit terms.
    Upper,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Full => Boundary::Full,
            BoundaryArg::Upper => Boundary::UpperOnly,
        }
    }
}

/// Form selection. Slopes are always in the verified variable `M`; for `W_k`
/// this is the `M` of `W_k(3^{k-3}·M)`.
#[derive(Debug, Clone, Args)]
struct FormArgs {
    /// Form family; inferred from --tuple, --alphas or --form when omitted.
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Number of factors.
    #[arg(long)]
    k: Option<usize>,
    /// Length of the U_{k,l} tuple.
    #[arg(long)]
    l: Option<usize>,
    /// Comma-separated coefficient tuple a_1,...,a_r.
    #[arg(long, value_name = "A1,A2,...")]
    tuple: Option<String>,
    /// Divide the tuple by its gcd before validation.
    #[arg(long)]
    normalize: bool,
    /// Comma-separated slopes of a custom form.
    #[arg(long, value_name = "A1,A2,...")]
    alphas: Option<String>,
    /// Substitution multiplier of a custom form.
    #[arg(long, default_value_t = 1)]
    s: u64,
    /// A serialized form line `provenance k s a1,...,ak`.
    #[arg(long, value_name = "LINE")]
    form: Option<String>,
}

#[derive(Debug, Clone, Args)]
struct EstimateArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Sum)]
    method: MethodArg,
    /// Boundary terms kept by the integral method.
    #[arg(long, value_enum, default_value_t = BoundaryArg::Full)]
    boundary: BoundaryArg,
    /// Prime cutoff for the correction constant.
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    cutoff: u64,
    /// Use this correction constant instead of computing it.
    #[arg(long)]
    constant: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the form line of a family member or theorem form.
    Construct {
        #[command(flatten)]
        form: FormArgs,
        /// Also print the coefficients of the expanded product in M.
        #[arg(long)]
        expand: bool,
    },
    /// Check that U(M) - 1 is divisible by every s*alpha_i*M.
    Verify {
        #[command(flatten)]
        form: FormArgs,
    },
    /// List every M in a range with all factors prime.
    Search {
        #[command(flatten)]
        form: FormArgs,
        #[arg(long, default_value_t = 1)]
        from: u64,
        #[arg(long)]
        to: u64,
        /// Search a form that fails verification.
        #[arg(long)]
        force: bool,
        /// Test every M instead of prefiltering with a residue wheel.
        #[arg(long)]
        no_wheel: bool,
        #[arg(long, default_value_t = DEFAULT_CHUNK)]
        chunk: u64,
    },
    /// Expected counts E(M) at the given bounds.
    Estimate {
        #[command(flatten)]
        form: FormArgs,
        /// Comma-separated bounds M.
        #[arg(long, value_name = "M1,M2,...", conflicts_with = "decades")]
        m: Option<String>,
        /// Decade exponents, e.g. `3..6` or `3,5,7`.
        #[arg(long)]
        decades: Option<String>,
        #[command(flatten)]
        est: EstimateArgs,
    },
    /// Check Korselt's criterion for `N p1 p2 ...`.
    Korselt {
        /// N followed by its claimed prime factors.
        values: Vec<String>,
        /// Read one `N p1 p2 ...` certificate per line.
        #[arg(long, value_name = "PATH", conflicts_with = "oracle")]
        certificates: Option<PathBuf>,
        /// Decide N by the Fermat definition instead (N <= 10^7).
        #[arg(long)]
        oracle: bool,
    },
    /// Actual counts, expected counts and their ratio at each decade.
    Report {
        #[command(flatten)]
        form: FormArgs,
        /// Decade exponents, e.g. `3..6`.
        #[arg(long, default_value = "3..6")]
        decades: String,
        #[command(flatten)]
        est: EstimateArgs,
        /// Skip the search and report estimates only.
        #[arg(long)]
        estimate_only: bool,
        #[arg(long)]
        no_wheel: bool,
        #[arg(long, default_value_t = DEFAULT_CHUNK)]
        chunk: u64,
    },
}

enum Failure {
    Usage(String),
    Domain(String),
    /// Already reported; exit with status 1.
    Negative,
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = dispatch(&cli, out, err);
    let _ = out.flush();
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Domain(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
        Err(Failure::Negative) => 1,
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match &cli.command {
        Command::Construct { form, expand } => {
            let form = select_form(form)?;
            writeln!(out, "{}", form.to_line()?)?;
            if *expand {
                let e = expand_coefficients(&form, true);
                let coeffs: Vec<String> = e.coefficients.iter().map(BigInt::to_string).collect();
                writeln!(out, "coefficients {}", coeffs.join(","))?;
            }
            Ok(())
        }
        Command::Verify { form } => {
            let form = select_form(form)?;
            let report = verify_universal(&form)?;
            writeln!(out, "{report}")?;
            if report.is_verified() {
                Ok(())
            } else {
                Err(Failure::Negative)
            }
        }
        Command::Search { form, from, to, force, no_wheel, chunk } => {
            let form = select_form(form)?;
            let wheel = wheel_for(&form, *no_wheel)?;
            let opts = SearchOptions { wheel: wheel.as_ref(), threads: cli.threads, chunk_size: *chunk, force: *force };
            search_cmd(cli, &form, *from, *to, &opts, out, err)
        }
        Command::Estimate { form, m, decades, est } => {
            let form = select_form(form)?;
            let ms = match (m, decades) {
                (Some(m), None) => parse_list(m).map_err(|e| Failure::Usage(e.to_string()))?,
                (None, Some(d)) => parse_decades(d)?.into_iter().map(|j| 10u64.pow(j)).collect(),
                (None, None) => return Err(Failure::Usage("one of --m or --decades is required".into())),
                (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
            };
            let (constant, cutoff) = resolve_constant(&form, est)?;
            let rows = estimates(&form, constant, &ms, est)?;
            write!(out, "{}", render_estimates(&rows, constant, cutoff, cli.format))?;
            Ok(())
        }
        Command::Korselt { values, certificates, oracle } => korselt_cmd(values, certificates.as_deref(), *oracle, out),
        Command::Report { form, decades, est, estimate_only, no_wheel, chunk } => {
            let form = select_form(form)?;
            let decades = parse_decades(decades)?;
            let ms: Vec<u64> = decades.iter().map(|&j| 10u64.pow(j)).collect();
            let mut rows: Vec<CountRow> = ms.iter().map(|&m| CountRow { m, actual: None, estimate: None }).collect();
            if !estimate_only {
                let wheel = wheel_for(&form, *no_wheel)?;
                let opts = SearchOptions { wheel: wheel.as_ref(), threads: cli.threads, chunk_size: *chunk, force: false };
                let resume = resume_from(cli.checkpoint.as_deref())?;
                let base = resume.as_ref().map_or(0, |cp| cp.scanned);
                let (table, _) = count_at_checkpoints(&form, &decades, resume, &opts, progress(cli, base, err))?;
                for (row, counted) in rows.iter_mut().zip(table.rows) {
                    row.actual = counted.actual;
                }
            }
            let (constant, _) = resolve_constant(&form, est)?;
            for (row, e) in rows.iter_mut().zip(estimates(&form, constant, &ms, est)?) {
                row.estimate = Some(e.e);
            }
            let text = match cli.format {
                Format::Table => render_table(&rows),
                Format::Csv => render_report_csv(&rows),
            };
            write!(out, "{text}")?;
            Ok(())
        }
    }
}

fn select_form(args: &FormArgs) -> Result<UniversalForm, Failure> {
    let family = match args.family {
        Some(f) => Some(f),
        None if args.tuple.is_some() => Some(Family::Theorem),
        None if args.alphas.is_some() => Some(Family::Custom),
        None => None,
    };
    let need = |v: Option<usize>, flag: &str, fam: &str| {
        v.ok_or_else(|| Failure::Usage(format!("--family {fam} needs --{flag}")))
    };
    let list = |v: &Option<String>, flag: &str| -> Result<Vec<u64>, Failure> {
        let text = v.as_deref().ok_or_else(|| Failure::Usage(format!("--{flag} is required")))?;
        parse_list(text).map_err(|e| Failure::Usage(format!("--{flag}: {e}")))
    };
    match (family, &args.form) {
        (None, Some(line)) => Ok(line.parse()?),
        (None, None) => Err(Failure::Usage("select a form with --family, --tuple, --alphas or --form".into())),
        (Some(_), Some(_)) => Err(Failure::Usage("--form cannot be combined with --family".into())),
        (Some(Family::Ukl), None) => Ok(family_ukl(need(args.k, "k", "ukl")?, need(args.l, "l", "ukl")?)?),
        (Some(Family::Wk), None) => Ok(family_wk(need(args.k, "k", "wk")?)?),
        (Some(Family::Theorem), None) => {
            let values = list(&args.tuple, "tuple")?;
            let tuple = if args.normalize {
                CoefficientTuple::normalized(&values)?
            } else {
                CoefficientTuple::new(&values)?
            };
            let k = args.k.unwrap_or(tuple.r());
            Ok(construct_theorem_form(&tuple, k)?)
        }
        (Some(Family::Custom), None) => Ok(UniversalForm::custom(&list(&args.alphas, "alphas")?, args.s)?),
    }
}

/// Parses `a..b` (inclusive) or a comma-separated list of exponents.
fn parse_decades(text: &str) -> Result<Vec<u32>, Failure> {
    let bad = || Failure::Usage(format!("bad decade range `{text}`"));
    let decades: Vec<u32> = match text.split_once("..") {
        Some((a, b)) => {
            let a: u32 = a.trim().parse().map_err(|_| bad())?;
            let b: u32 = b.trim().parse().map_err(|_| bad())?;
            (a..=b).collect()
        }
        None => text
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?,
    };
    if decades.is_empty() || decades.windows(2).any(|w| w[0] >= w[1]) || decades[decades.len() - 1] > 19 {
        return Err(bad());
    }
    Ok(decades)
}

fn wheel_for(form: &UniversalForm, disabled: bool) -> Result<Option<ResidueWheel>, Failure> {
    if disabled {
        return Ok(None);
    }
    Ok(Some(build_wheel(form, &default_wheel_primes(form))?))
}

fn resume_from(path: Option<&Path>) -> Result<Option<SearchCheckpoint>, Failure> {
    match path {
        Some(p) if p.exists() => Ok(Some(load_checkpoint(p)?)),
        _ => Ok(None),
    }
}

/// Progress callback: saves the checkpoint if requested and reports on stderr.
fn progress<'a>(
    cli: &'a Cli,
    base: u64,
    err: &'a mut dyn Write,
) -> impl FnMut(&SearchCheckpoint) -> Result<(), SearchError> + 'a {
    let start = Instant::now();
    move |cp| {
        if let Some(path) = &cli.checkpoint {
            save_checkpoint(cp, path)?;
        }
        let secs = start.elapsed().as_secs_f64();
        let rate = if secs > 0.0 { (cp.scanned - base) as f64 / secs } else { 0.0 };
        let _ = writeln!(err, "progress: M = {}, hits = {}, rate = {rate:.0} M/s", cp.scanned, cp.hits.len());
        Ok(())
    }
}

fn search_cmd(
    cli: &Cli,
    form: &UniversalForm,
    from: u64,
    to: u64,
    opts: &SearchOptions<'_>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Outcome {
    let k = form.k();
    let rows: Vec<(u64, Vec<BigInt>, BigInt)> = match &cli.checkpoint {
        None => search_range(form, from, to, opts)?
            .into_iter()
            .map(|h| (h.m, h.factors, h.n))
            .collect(),
        Some(path) => {
            if from < 1 || from > to {
                return Err(SearchError::BadRange { lo: from, hi: to }.into());
            }
            let resume = resume_from(Some(path))?;
            let mut cp = match resume {
                Some(cp) => {
                    let expected = form.to_line()?;
                    if cp.form != expected {
                        return Err(SearchError::FormMismatch { expected, found: cp.form }.into());
                    }
                    cp
                }
                None => SearchCheckpoint::new(form)?,
            };
            let base = cp.scanned;
            scan_into(form, &mut cp, to, opts, &mut progress(cli, base, err))?;
            cp.hits
                .iter()
                .filter(|&&m| (from..=to).contains(&m))
                .map(|&m| evaluate(form, m).map(|e| (m, e.factors, e.product)))
                .collect::<Result<_, _>>()?
        }
    };
    match cli.format {
        Format::Csv => {
            writeln!(out, "{}", csv_header(k))?;
            for (m, factors, n) in &rows {
                let mut line = m.to_string();
                for f in factors {
                    let _ = write!(line, ",{f}");
                }
                writeln!(out, "{line},{n}")?;
            }
        }
        Format::Table => {
            let mw = rows.iter().map(|r| r.0.to_string().len()).max().unwrap_or(1).max(1);
            writeln!(out, "{:>mw$}  N", "M")?;
            for (m, factors, n) in &rows {
                let fs: Vec<String> = factors.iter().map(BigInt::to_string).collect();
                writeln!(out, "{m:>mw$}  {n} = {}", fs.join(" * "))?;
            }
            writeln!(out, "{} hits", rows.len())?;
        }
    }
    Ok(())
}

fn resolve_constant(form: &UniversalForm, est: &EstimateArgs) -> Result<(f64, Option<u64>), Failure> {
    match est.constant {
        Some(c) if c > 0.0 && c.is_finite() => Ok((c, None)),
        Some(c) => Err(Failure::Usage(format!("--constant must be positive, got {c}"))),
        None => Ok((singular_constant(form, est.cutoff)?.value, Some(est.cutoff))),
    }
}

fn estimates(form: &UniversalForm, constant: f64, ms: &[u64], est: &EstimateArgs) -> Result<Vec<EstimateRow>, Failure> {
    match est.method {
        MethodArg::Sum => {
            let mut sorted = ms.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            let rows = estimate_by_sum_at(form, constant, &sorted)?;
            Ok(ms.iter().map(|m| rows[sorted.binary_search(m).expect("present")]).collect())
        }
        MethodArg::Integral => ms
            .iter()
            .map(|&m| estimate_by_integral(form, constant, m, est.boundary.into()).map_err(Failure::from))
            .collect(),
    }
}

fn render_estimates(rows: &[EstimateRow], constant: f64, cutoff: Option<u64>, format: Format) -> String {
    let cutoff = cutoff.map_or_else(|| "given".to_string(), |c| c.to_string());
    let mut s = String::new();
    match format {
        Format::Csv => {
            s.push_str("M,E,rounded_E,method,constant,cutoff\n");
            for r in rows {
                let _ = writeln!(s, "{},{:.6},{},{},{constant:.6},{cutoff}", r.m, r.e, r.rounded, r.method);
            }
        }
        Format::Table => {
            let _ = writeln!(s, "{:>12} {:>16} {:>10}  method", "M", "E", "rounded");
            for r in rows {
                let _ = writeln!(s, "{:>12} {:>16.6} {:>10}  {}", r.m, r.e, r.rounded, r.method);
            }
            let _ = writeln!(s, "constant {constant:.6} (cutoff {cutoff})");
        }
    }
    s
}

fn render_report_csv(rows: &[CountRow]) -> String {
    let mut s = String::from("M,E,N,ratio\n");
    for r in rows {
        let e = r.estimate.map_or(String::new(), |e| format!("{}", e.round() as i64));
        let n = r.actual.map_or(String::new(), |n| n.to_string());
        let ratio = r.ratio().map_or(String::new(), |q| format!("{q:.5}"));
        let _ = writeln!(s, "{},{e},{n},{ratio}", r.m);
    }
    s
}

/// Aligned `M | E | N | E/N` columns; `E` is rounded and the ratio has five
/// decimals. Missing values print as `-`.
pub fn render_table(rows: &[CountRow]) -> String {
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                r.m.to_string(),
                r.estimate.map_or("-".into(), |e| (e.round() as i64).to_string()),
                r.actual.map_or("-".into(), |n| n.to_string()),
                r.ratio().map_or("-".into(), |q| format!("{q:.5}")),
            ]
        })
        .collect();
    let header = ["M", "E", "N", "E/N"];
    let mut widths = [12usize, 8, 8, 8];
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut s = String::new();
    let line = |s: &mut String, cols: [&str; 4]| {
        let _ = writeln!(
            s,
            "{:>w0$} | {:>w1$} | {:>w2$} | {:>w3$}",
            cols[0],
            cols[1],
            cols[2],
            cols[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        );
    };
    line(&mut s, header);
    let _ = writeln!(
        s,
        "{}-+-{}-+-{}-+-{}",
        "-".repeat(widths[0]),
        "-".repeat(widths[1]),
        "-".repeat(widths[2]),
        "-".repeat(widths[3])
    );
    for row in &cells {
        line(&mut s, [&row[0], &row[1], &row[2], &row[3]]);
    }
    s
}

fn korselt_cmd(values: &[String], certificates: Option<&Path>, oracle: bool, out: &mut dyn Write) -> Outcome {
    if oracle {
        let [n] = values else {
            return Err(Failure::Usage("--oracle takes exactly one N".into()));
        };
        let n: u64 = n.parse().map_err(|_| Failure::Usage(format!("bad N `{n}`")))?;
        let yes = carmichael_oracle(n)?;
        writeln!(out, "{n} {}", if yes { "carmichael" } else { "not carmichael" })?;
        return if yes { Ok(()) } else { Err(Failure::Negative) };
    }
    let lines: Vec<String> = match certificates {
        Some(path) => {
            if !values.is_empty() {
                return Err(Failure::Usage("give values or --certificates, not both".into()));
            }
            std::fs::read_to_string(path)?
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
                .map(str::to_string)
                .collect()
        }
        None if values.len() >= 2 => vec![values.join(" ")],
        None => return Err(Failure::Usage("expected N followed by its factors".into())),
    };
    let mut all_ok = true;
    for line in &lines {
        let (n, factors) = parse_certificate_line(line)?;
        match korselt_check(&n, &factors)? {
            KorseltOutcome::Accepted(cert) => writeln!(out, "accepted {cert}")?,
            KorseltOutcome::Rejected(reasons) => {
                all_ok = false;
                let reasons: Vec<String> = reasons.iter().map(ToString::to_string).collect();
                writeln!(out, "rejected {n}: {}", reasons.join("; "))?;
            }
        }
    }
    if all_ok {
        Ok(())
    } else {
        Err(Failure::Negative)
    }
}
