//! Range scans for simultaneous primality of all factors of a universal form.
//!
//! The range is cut into fixed-size chunks that are scanned independently on a
//! rayon pool and merged in ascending order, so the output never depends on
//! the number of workers.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use num_bigint::BigInt;
use rayon::prelude::*;
use thiserror::Error;

use crate::forms::{evaluate, verify_universal, FormError, UniversalForm};
use crate::korselt::{korselt_check, CarmichaelCertificate, KorseltOutcome, BIG_FACTOR_ROUNDS};
use crate::primality::{is_prime_64, is_probable_prime_big, ResidueWheel};

pub const DEFAULT_CHUNK: u64 = 1 << 20;

/// Factor values at or above this bound are tested probabilistically.
pub const EXACT_BOUND: u128 = 1 << 63;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("form is not verified as universal ({0}); pass --force to search anyway")]
    NotVerified(String),
    #[error("invalid range [{lo}, {hi}]: need 1 <= lo <= hi")]
    BadRange { lo: u64, hi: u64 },
    #[error("decades must be strictly increasing and at most 19")]
    BadDecades,
    #[error("checkpoint belongs to `{found}`, not `{expected}`")]
    FormMismatch { expected: String, found: String },
    #[error("hit at M = {0} failed Korselt's criterion")]
    CertificateRejected(u64),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions<'a> {
    pub wheel: Option<&'a ResidueWheel>,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
    pub chunk_size: u64,
    /// Search forms that did not pass [`verify_universal`].
    pub force: bool,
}

impl Default for SearchOptions<'_> {
    fn default() -> Self {
        Self { wheel: None, threads: 1, chunk_size: DEFAULT_CHUNK, force: false }
    }
}

/// An `M` at which every factor is prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateHit {
    pub m: u64,
    pub factors: Vec<BigInt>,
    pub n: BigInt,
    /// `None` only for forced searches of forms that are not universal.
    pub certificate: Option<CarmichaelCertificate>,
    /// Some factor reached 2^63 and was only tested probabilistically.
    pub probabilistic: bool,
}

impl CandidateHit {
    pub fn csv_line(&self) -> String {
        let mut line = self.m.to_string();
        for f in &self.factors {
            line.push(',');
            line.push_str(&f.to_string());
        }
        line.push(',');
        line.push_str(&self.n.to_string());
        line
    }
}

pub fn csv_header(k: usize) -> String {
    let mut h = String::from("M");
    for i in 1..=k {
        h.push_str(&format!(",factor_{i}"));
    }
    h.push_str(",N");
    h
}

/// Factors sorted by slope so the cheapest rejection comes first.
struct Scanner {
    factors: Vec<(u128, i128)>,
}

impl Scanner {
    fn new(form: &UniversalForm) -> Self {
        let factors = form
            .scaled_alphas()
            .into_iter()
            .zip(form.factors())
            .map(|(a, f)| (a as u128, f.beta as i128))
            .collect();
        Self { factors }
    }

    /// `Some(probabilistic)` if every factor is prime at `m`.
    fn test(&self, m: u64) -> Option<bool> {
        let mut probabilistic = false;
        for &(a, b) in &self.factors {
            let base = a * m as u128;
            let value = if b >= 0 {
                base.checked_add(b as u128)
            } else {
                Some(base.checked_sub(b.unsigned_abs())?)
            };
            match value {
                Some(v) if v < 2 => return None,
                Some(v) if v < EXACT_BOUND => {
                    if !is_prime_64(v as u64) {
                        return None;
                    }
                }
                _ => {
                    probabilistic = true;
                    let v = BigInt::from(base) + b;
                    if !is_probable_prime_big(&v, BIG_FACTOR_ROUNDS).unwrap_or(false) {
                        return None;
                    }
                }
            }
        }
        Some(probabilistic)
    }

    fn scan(&self, lo: u64, hi: u64, wheel: Option<&ResidueWheel>) -> Vec<(u64, bool)> {
        match wheel {
            Some(w) => w
                .candidates(lo, hi)
                .into_iter()
                .filter_map(|m| self.test(m).map(|p| (m, p)))
                .collect(),
            None => (lo..=hi).filter_map(|m| self.test(m).map(|p| (m, p))).collect(),
        }
    }
}

fn chunks(lo: u64, hi: u64, size: u64) -> Vec<(u64, u64)> {
    let size = size.max(1);
    let mut out = Vec::new();
    let mut start = lo;
    loop {
        let end = start.saturating_add(size - 1).min(hi);
        out.push((start, end));
        if end == hi {
            break;
        }
        start = end + 1;
    }
    out
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, SearchError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SearchError::Pool(e.to_string()))
}

/// Refuses forms that are not verified universal unless `force` is set.
/// Returns whether the form is verified.
pub fn ensure_searchable(form: &UniversalForm, force: bool) -> Result<bool, SearchError> {
    let verdict = match verify_universal(form) {
        Ok(report) => {
            if report.is_verified() {
                return Ok(true);
            }
            report.to_string()
        }
        Err(e @ FormError::UnsupportedForm) => e.to_string(),
        Err(e) => return Err(e.into()),
    };
    if force {
        Ok(false)
    } else {
        Err(SearchError::NotVerified(verdict))
    }
}

fn make_hit(form: &UniversalForm, m: u64, probabilistic: bool, verified: bool) -> Result<CandidateHit, SearchError> {
    let eval = evaluate(form, m)?;
    let outcome = korselt_check(&eval.product, &eval.factors)
        .expect("product of evaluated factors");
    let certificate = match outcome {
        KorseltOutcome::Accepted(c) => Some(c),
        KorseltOutcome::Rejected(_) if verified => return Err(SearchError::CertificateRejected(m)),
        KorseltOutcome::Rejected(_) => None,
    };
    Ok(CandidateHit { m, factors: eval.factors, n: eval.product, certificate, probabilistic })
}

fn scan_parallel(
    scanner: &Scanner,
    ranges: &[(u64, u64)],
    opts: &SearchOptions<'_>,
    pool: &rayon::ThreadPool,
) -> Vec<Vec<(u64, bool)>> {
    pool.install(|| {
        ranges
            .par_iter()
            .map(|&(lo, hi)| scanner.scan(lo, hi, opts.wheel))
            .collect()
    })
}

/// Every `M` in `[lo, hi]` at which all factors are prime, ascending, each with
/// a Korselt certificate.
pub fn search_range(
    form: &UniversalForm,
    lo: u64,
    hi: u64,
    opts: &SearchOptions<'_>,
) -> Result<Vec<CandidateHit>, SearchError> {
    if lo == 0 || lo > hi {
        return Err(SearchError::BadRange { lo, hi });
    }
    let verified = ensure_searchable(form, opts.force)?;
    let scanner = Scanner::new(form);
    let pool = pool(opts.threads)?;
    let found = scan_parallel(&scanner, &chunks(lo, hi, opts.chunk_size), opts, &pool);
    found
        .into_iter()
        .flatten()
        .map(|(m, p)| make_hit(form, m, p, verified))
        .collect()
}

/// Progress of a decade count: every `M ≤ scanned` has been tested.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchCheckpoint {
    /// Canonical form line.
    pub form: String,
    pub scanned: u64,
    /// Ascending hit values of `M`.
    pub hits: Vec<u64>,
}

impl SearchCheckpoint {
    pub fn new(form: &UniversalForm) -> Result<Self, SearchError> {
        Ok(Self { form: form.to_line()?, scanned: 0, hits: Vec::new() })
    }

    /// Hits with `M ≤ bound`.
    pub fn count_up_to(&self, bound: u64) -> u64 {
        self.hits.partition_point(|&m| m <= bound) as u64
    }

    /// `10^j ↦ count` for each requested decade already covered by the scan.
    pub fn decade_counts(&self, decades: &[u32]) -> Vec<(u64, u64)> {
        decades
            .iter()
            .map(|&j| 10u64.pow(j))
            .filter(|&m| m <= self.scanned)
            .map(|m| (m, self.count_up_to(m)))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("version {CHECKPOINT_VERSION}\n{}\nscanned {}\n", self.form, self.scanned);
        for m in &self.hits {
            s.push_str(&format!("hit {m}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, CheckpointError> {
        let lines: Vec<&str> = text.split('\n').collect();
        // a complete file ends with a newline, leaving an empty last piece
        let complete = lines.last() == Some(&"");
        let body = if complete { &lines[..lines.len() - 1] } else { &lines[..] };
        if !complete {
            return Err(CheckpointError::Parse {
                line: body.len(),
                message: "truncated: last line has no newline".into(),
            });
        }
        let missing = |line: usize, what: &str| CheckpointError::Parse {
            line,
            message: format!("missing {what}"),
        };
        let header = body.first().ok_or_else(|| missing(1, "version header"))?;
        match header.strip_prefix("version ") {
            Some(v) if v.trim() == CHECKPOINT_VERSION.to_string() => {}
            Some(v) => return Err(CheckpointError::Version(v.trim().to_string())),
            None => {
                return Err(CheckpointError::Parse { line: 1, message: "expected `version 1`".into() })
            }
        }
        let form_line = body.get(1).ok_or_else(|| missing(2, "form line"))?;
        form_line
            .parse::<UniversalForm>()
            .map_err(|e| CheckpointError::Parse { line: 2, message: e.to_string() })?;
        let scanned_line = body.get(2).ok_or_else(|| missing(3, "`scanned` line"))?;
        let scanned = parse_tagged(scanned_line, "scanned", 3)?;
        let mut hits = Vec::with_capacity(body.len().saturating_sub(3));
        for (i, line) in body.iter().enumerate().skip(3) {
            let m = parse_tagged(line, "hit", i + 1)?;
            if hits.last().is_some_and(|&prev| prev >= m) {
                return Err(CheckpointError::Parse { line: i + 1, message: "hits not ascending".into() });
            }
            if m > scanned || m == 0 {
                return Err(CheckpointError::Parse {
                    line: i + 1,
                    message: format!("hit {m} outside scanned range"),
                });
            }
            hits.push(m);
        }
        Ok(Self { form: form_line.to_string(), scanned, hits })
    }
}

fn parse_tagged(line: &str, tag: &str, number: usize) -> Result<u64, CheckpointError> {
    line.strip_prefix(tag)
        .and_then(|rest| rest.strip_prefix(' '))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CheckpointError::Parse {
            line: number,
            message: format!("expected `{tag} <integer>`, got `{line}`"),
        })
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported checkpoint version `{0}`")]
    Version(String),
    #[error("checkpoint i/o: {0}")]
    Io(String),
}

/// Writes through a temporary file so a crash never leaves a half-written
/// checkpoint behind.
pub fn save_checkpoint(cp: &SearchCheckpoint, path: &Path) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    let io = |e: std::io::Error| CheckpointError::Io(e.to_string());
    let mut file = fs::File::create(&tmp).map_err(io)?;
    file.write_all(cp.to_text().as_bytes()).map_err(io)?;
    file.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<SearchCheckpoint, CheckpointError> {
    let text = fs::read_to_string(path).map_err(|e| CheckpointError::Io(e.to_string()))?;
    SearchCheckpoint::from_text(&text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountRow {
    pub m: u64,
    pub actual: Option<u64>,
    pub estimate: Option<f64>,
}

impl CountRow {
    /// `E(M)/N(M)` using the rounded estimate, as the tables print it.
    pub fn ratio(&self) -> Option<f64> {
        match (self.estimate, self.actual) {
            (Some(e), Some(n)) if n > 0 => Some(e.round() / n as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountTable {
    pub rows: Vec<CountRow>,
}

/// Scans up to `10^max(decades)`, resuming from `resume` if given, and reports
/// the cumulative hit counts at each decade.
///
/// `on_checkpoint` is called after every merged chunk.
pub fn count_at_checkpoints(
    form: &UniversalForm,
    decades: &[u32],
    resume: Option<SearchCheckpoint>,
    opts: &SearchOptions<'_>,
    mut on_checkpoint: impl FnMut(&SearchCheckpoint) -> Result<(), SearchError>,
) -> Result<(CountTable, SearchCheckpoint), SearchError> {
    if decades.is_empty() || decades.windows(2).any(|w| w[0] >= w[1]) || decades[decades.len() - 1] > 19 {
        return Err(SearchError::BadDecades);
    }
    let target = 10u64.pow(decades[decades.len() - 1]);
    let mut cp = match resume {
        Some(cp) => {
            let expected = form.to_line()?;
            if cp.form != expected {
                return Err(SearchError::FormMismatch { expected, found: cp.form });
            }
            cp
        }
        None => SearchCheckpoint::new(form)?,
    };
    scan_into(form, &mut cp, target, opts, &mut on_checkpoint)?;
    let rows = decades
        .iter()
        .map(|&j| {
            let m = 10u64.pow(j);
            CountRow { m, actual: Some(cp.count_up_to(m)), estimate: None }
        })
        .collect();
    Ok((CountTable { rows }, cp))
}

/// Extends `cp` until `scanned ≥ target`.
pub fn scan_into(
    form: &UniversalForm,
    cp: &mut SearchCheckpoint,
    target: u64,
    opts: &SearchOptions<'_>,
    on_checkpoint: &mut impl FnMut(&SearchCheckpoint) -> Result<(), SearchError>,
) -> Result<(), SearchError> {
    if cp.scanned >= target {
        return Ok(());
    }
    let verified = ensure_searchable(form, opts.force)?;
    let scanner = Scanner::new(form);
    let pool = pool(opts.threads)?;
    let wave = pool.current_num_threads().max(1) as u64;
    let all = chunks(cp.scanned + 1, target, opts.chunk_size);
    for group in all.chunks(wave as usize) {
        let found = scan_parallel(&scanner, group, opts, &pool);
        for (&(_, end), hits) in group.iter().zip(found) {
            for (m, p) in hits {
                make_hit(form, m, p, verified)?;
                cp.hits.push(m);
            }
            cp.scanned = end;
            on_checkpoint(cp)?;
        }
    }
    Ok(())
}

impl fmt::Display for SearchCheckpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} scanned to {} with {} hits", self.form, self.scanned, self.hits.len())
    }
}
