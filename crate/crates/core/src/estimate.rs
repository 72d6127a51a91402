//! Hardy–Littlewood style expected counts for universal forms.
//!
//! The expected number of `M ≤ X` with every factor prime is modelled as
//! `C · Σ_{M ≤ X} ∏_i 1/log(s·α_i·M + 1)`, where the correction constant `C` is
//! the singular series `∏_p (1 − ω(p)/p) / (1 − 1/p)^k` and `ω(p)` counts the
//! residues `M mod p` at which `p` divides some factor.

use std::fmt;

use thiserror::Error;

use crate::forms::{family_ukl, UniversalForm};
use crate::primality::{isqrt, mod_inverse, sieve_primes, PrimalityError, PrimeTable};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `li(2)`, the offset between the offset and the plain logarithmic integral.
pub const LI_2: f64 = 1.045_163_780_117_492_8;

pub const DEFAULT_CUTOFF: u64 = 10_000_000;

const MIN_CUTOFF: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("prime cutoff must be at least {MIN_CUTOFF}, got {0}")]
    CutoffTooSmall(u64),
    #[error("every M makes some factor divisible by {0}; the constant vanishes")]
    Degenerate(u64),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Primality(#[from] PrimalityError),
}

/// Number of residues `M mod p` with `p | ∏ (s·α_i·M + β_i)`.
pub fn root_count_omega(form: &UniversalForm, p: u64) -> u64 {
    let mut roots: Vec<u64> = Vec::with_capacity(form.k());
    for (a, f) in form.scaled_alphas().into_iter().zip(form.factors()) {
        let a = a % p;
        let b = f.beta.rem_euclid(p as i64) as u64;
        if a == 0 {
            if b == 0 {
                return p;
            }
            continue;
        }
        let root = ((p - b) % p) as u128 * mod_inverse(a, p) as u128 % p as u128;
        roots.push(root as u64);
    }
    roots.sort_unstable();
    roots.dedup();
    roots.len() as u64
}

/// Neumaier's compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// A correction constant truncated at primes `≤ cutoff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularConstant {
    pub value: f64,
    pub cutoff: u64,
    /// Estimate of `|log(true value) − log(value)|`.
    pub log_tail_bound: f64,
}

impl SingularConstant {
    /// Tail bound on the constant itself rather than its logarithm.
    pub fn abs_tail_bound(&self) -> f64 {
        self.value * self.log_tail_bound.exp_m1()
    }
}

impl fmt::Display for SingularConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} (primes <= {}, tail <= {:.1e})", self.value, self.cutoff, self.abs_tail_bound())
    }
}

/// `∏_{p ≤ cutoff} (1 − ω(p)/p) / (1 − 1/p)^k`, accumulated in logarithms.
pub fn singular_constant(form: &UniversalForm, cutoff: u64) -> Result<SingularConstant, EstimateError> {
    if cutoff < MIN_CUTOFF {
        return Err(EstimateError::CutoffTooSmall(cutoff));
    }
    singular_constant_with(form, &sieve_primes(cutoff)?, cutoff)
}

/// Same as [`singular_constant`] but reuses a prime table covering `cutoff`.
pub fn singular_constant_with(
    form: &UniversalForm,
    table: &PrimeTable,
    cutoff: u64,
) -> Result<SingularConstant, EstimateError> {
    if cutoff < MIN_CUTOFF {
        return Err(EstimateError::CutoffTooSmall(cutoff));
    }
    if table.limit() < cutoff {
        return Err(EstimateError::Domain(format!(
            "prime table stops at {} below cutoff {cutoff}",
            table.limit()
        )));
    }
    let k = form.k() as f64;
    let mut log = CompensatedSum::default();
    for &p in table.up_to(cutoff) {
        let omega = root_count_omega(form, p);
        if omega >= p {
            return Err(EstimateError::Degenerate(p));
        }
        let pf = p as f64;
        log.add((-(omega as f64) / pf).ln_1p() - k * (-1.0 / pf).ln_1p());
    }
    Ok(SingularConstant {
        value: log.value().exp(),
        cutoff,
        log_tail_bound: tail_bound(form.k(), cutoff),
    })
}

/// `Σ_{p > P} k(k−1)/(2p²) ≈ k(k−1) / (2 P log P)`.
fn tail_bound(k: usize, cutoff: u64) -> f64 {
    let p = cutoff as f64;
    (k * (k - 1)) as f64 / (2.0 * p * p.ln())
}

/// The per-factor constants of the conditional-probability derivation for
/// `(20m+1)(80m+1)(100m+1)(200m+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConstants {
    /// Factor for `20m+1` alone: `2/1 · 5/4`.
    pub p_q: f64,
    pub c_r: f64,
    pub c_s: f64,
    pub c_t: f64,
    pub cutoff: u64,
}

impl ChainConstants {
    pub fn product(&self) -> f64 {
        self.p_q * self.c_r * self.c_s * self.c_t
    }
}

/// Chain constants with the infinite products truncated at `cutoff`.
///
/// For `p ≥ 7` the three per-prime factors are `p(p−2)/(p−1)²`,
/// `p(p−3)/((p−1)(p−2))` and `p(p−4)/((p−1)(p−3))`; the small primes contribute
/// `2·3/2·5/4`, `2·3/4·5/4` and `2·3/2·5/4` respectively.
pub fn dubner_chain_constants_u44(cutoff: u64) -> Result<ChainConstants, EstimateError> {
    if cutoff < MIN_CUTOFF {
        return Err(EstimateError::CutoffTooSmall(cutoff));
    }
    let table = sieve_primes(cutoff)?;
    let (mut r, mut s, mut t) = (CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default());
    for &p in table.primes().iter().filter(|&&p| p >= 7) {
        let p = p as f64;
        // p(p-2) = (p-1)^2 - 1, p(p-3) = (p-1)(p-2) - 2, p(p-4) = (p-1)(p-3) - 3
        r.add((-1.0 / ((p - 1.0) * (p - 1.0))).ln_1p());
        s.add((-2.0 / ((p - 1.0) * (p - 2.0))).ln_1p());
        t.add((-3.0 / ((p - 1.0) * (p - 3.0))).ln_1p());
    }
    Ok(ChainConstants {
        p_q: 2.0 * 5.0 / 4.0,
        c_r: 2.0 * 1.5 * 1.25 * r.value().exp(),
        c_s: 2.0 * 0.75 * 1.25 * s.value().exp(),
        c_t: 2.0 * 1.5 * 1.25 * t.value().exp(),
        cutoff,
    })
}

/// The `U_{4,4}` form the chain constants belong to.
pub fn chain_form() -> UniversalForm {
    family_ukl(4, 4).expect("U_{4,4} is a valid family member")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sum,
    Integral,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sum => "sum",
            Method::Integral => "integral",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRow {
    pub m: u64,
    pub e: f64,
    pub rounded: i64,
    pub method: Method,
}

impl EstimateRow {
    fn new(m: u64, e: f64, method: Method) -> Self {
        Self { m, e, rounded: e.round() as i64, method }
    }
}

/// `C · Σ_{M'=1}^{M} ∏_i 1/log(s·α_i·M' + β_i)`.
pub fn estimate_by_sum(form: &UniversalForm, constant: f64, m: u64) -> Result<EstimateRow, EstimateError> {
    Ok(estimate_by_sum_at(form, constant, &[m])?[0])
}

/// Running sum evaluated at each of the ascending bounds `ms` in one pass.
pub fn estimate_by_sum_at(
    form: &UniversalForm,
    constant: f64,
    ms: &[u64],
) -> Result<Vec<EstimateRow>, EstimateError> {
    if ms.iter().any(|&m| m == 0) || ms.windows(2).any(|w| w[0] > w[1]) {
        return Err(EstimateError::Domain("bounds must be ascending and at least 1".into()));
    }
    let slopes: Vec<(f64, f64)> = form
        .scaled_alphas()
        .into_iter()
        .zip(form.factors())
        .map(|(a, f)| (a as f64, f.beta as f64))
        .collect();
    let mut acc = CompensatedSum::default();
    let mut rows = Vec::with_capacity(ms.len());
    let mut next = 1u64;
    for &bound in ms {
        while next <= bound {
            let x = next as f64;
            let mut denom = 1.0;
            for &(a, b) in &slopes {
                denom *= (a * x + b).ln();
            }
            acc.add(1.0 / denom);
            next += 1;
        }
        rows.push(EstimateRow::new(bound, constant * acc.value(), Method::Sum));
    }
    Ok(rows)
}

/// Which boundary terms of the repeated integration by parts are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Both limits: the exact value of `∫_1^M dm / log^k(a_M·m)`.
    #[default]
    Full,
    /// Only the upper-limit terms, the closed form usually quoted for `k = 4`.
    UpperOnly,
}

/// `a_M` defined by `∏_i log(s·α_i·M + β_i) = log(a_M·M)^k`.
pub fn a_m(form: &UniversalForm, m: u64) -> f64 {
    let k = form.k() as f64;
    let mean_log: f64 = form
        .scaled_alphas()
        .into_iter()
        .zip(form.factors())
        .map(|(a, f)| (a as f64 * m as f64 + f.beta as f64).ln().ln())
        .sum::<f64>()
        / k;
    mean_log.exp().exp() / m as f64
}

/// Closed form of the sum estimate via `∫_1^M dm/log^k(a_M·m)`.
///
/// With `t = a_M·m`, repeated integration by parts gives
/// `∫ dt/log^k t = (Li(t) − t·Σ_{j=1}^{k−1} (j−1)!/log^j t) / (k−1)!`.
pub fn estimate_by_integral(
    form: &UniversalForm,
    constant: f64,
    m: u64,
    boundary: Boundary,
) -> Result<EstimateRow, EstimateError> {
    if m == 0 {
        return Err(EstimateError::Domain("M must be at least 1".into()));
    }
    let k = form.k();
    let a = a_m(form, m);
    if a <= std::f64::consts::E {
        return Err(EstimateError::Domain(format!("a_M = {a} must exceed e")));
    }
    let upper = a * m as f64;
    let factorial: f64 = (1..k).map(|j| j as f64).product();
    let boundary_terms = |t: f64| {
        let l = t.ln();
        let mut coeff = 1.0; // (j-1)!
        let mut pow = 1.0;
        let mut s = 0.0;
        for j in 1..k {
            pow *= l;
            s += coeff / pow;
            coeff *= j as f64;
        }
        t * s
    };
    let li = log_integral(upper)? - log_integral(a)?;
    let inner = match boundary {
        Boundary::Full => li - boundary_terms(upper) + boundary_terms(a),
        Boundary::UpperOnly => li - boundary_terms(upper),
    };
    Ok(EstimateRow::new(m, constant / a * inner / factorial, Method::Integral))
}

/// `∫_2^x dt / log t`. Negative for `1 < x < 2`.
pub fn log_integral(x: f64) -> Result<f64, EstimateError> {
    if !(x > 1.0) || !x.is_finite() {
        return Err(EstimateError::Domain(format!("log integral needs finite x > 1, got {x}")));
    }
    if (1.5..=3.0).contains(&x) {
        Ok(gauss_legendre_inv_log(2.0, x))
    } else {
        Ok(li_ramanujan(x) - LI_2)
    }
}

/// Ramanujan's series for `li(x)`, convergent for all `x > 1`.
fn li_ramanujan(x: f64) -> f64 {
    let l = x.ln();
    let mut sum = 0.0;
    let mut term = 1.0; // (ln x)^n / (n! 2^(n-1)) built incrementally
    let mut inner = 0.0; // Σ_{k=0}^{⌊(n−1)/2⌋} 1/(2k+1)
    for n in 1..400 {
        term *= l / n as f64;
        if n > 1 {
            term /= 2.0;
        }
        if (n - 1) % 2 == 0 {
            inner += 1.0 / (n as f64);
        }
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let add = sign * term * inner;
        sum += add;
        if n as f64 > l && add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    EULER_GAMMA + l.ln() + x.sqrt() * sum
}

/// Composite 20-point Gauss–Legendre rule for `∫_lo^hi dt/log t` on a short
/// interval away from `t = 1`.
fn gauss_legendre_inv_log(lo: f64, hi: f64) -> f64 {
    const PANELS: usize = 8;
    let (nodes, weights) = gauss_legendre_nodes(20);
    let width = (hi - lo) / PANELS as f64;
    let mut total = 0.0;
    for i in 0..PANELS {
        let a = lo + i as f64 * width;
        let mid = a + width / 2.0;
        let half = width / 2.0;
        for (x, w) in nodes.iter().zip(&weights) {
            total += w * half / (mid + half * x).ln();
        }
    }
    total
}

fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertensReport {
    /// `∏_{p ≤ √N} (p − 1)/p`.
    pub product: f64,
    /// `2e^{−γ} / log N`.
    pub asymptote: f64,
    pub ratio: f64,
}

pub fn mertens_product(n: u64) -> Result<MertensReport, EstimateError> {
    if n < 9 {
        return Err(EstimateError::Domain(format!("N must be at least 9, got {n}")));
    }
    let table = sieve_primes(isqrt(n))?;
    let mut log = CompensatedSum::default();
    for &p in table.primes() {
        log.add((-1.0 / p as f64).ln_1p());
    }
    let product = log.value().exp();
    let asymptote = 2.0 * (-EULER_GAMMA).exp() / (n as f64).ln();
    Ok(MertensReport { product, asymptote, ratio: product / asymptote })
}
