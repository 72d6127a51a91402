//! Coefficient tuples and universal forms.
//!
//! A [`UniversalForm`] stores its linear factors in the unsubstituted variable
//! `m` together with the substitution multiplier `s` (`m = s·M`). Everything
//! that searches or verifies works in `M`, i.e. with the scaled slopes `s·α_i`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

/// Largest modulus `s·α_i` for which [`verify_universal`] falls back to
/// enumerating residues.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormError {
    #[error("coefficient tuple is empty")]
    EmptyTuple,
    #[error("coefficient tuple rejected: {0}")]
    InvalidTuple(ValidationReport),
    #[error("factor count k = {k} is smaller than the tuple length r = {r}")]
    FactorCountTooSmall { k: usize, r: usize },
    #[error("{0}")]
    BadParameter(String),
    #[error("a form needs at least 3 factors, got {0}")]
    TooFewFactors(usize),
    #[error("slope must be positive")]
    ZeroSlope,
    #[error("substitution multiplier must be positive")]
    ZeroSubstitution,
    #[error("duplicate linear factor ({alpha}, {beta})")]
    DuplicateFactor { alpha: u64, beta: i64 },
    #[error("integer overflow while building the form")]
    Overflow,
    #[error("only forms with every intercept equal to 1 are supported here")]
    UnsupportedForm,
    #[error("M must be at least 1")]
    ZeroArgument,
    #[error("cannot parse form line: {0}")]
    Parse(String),
}

/// One violated hypothesis of the tuple construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TooShort { len: usize },
    NotPositive { index: usize },
    NotIncreasing { index: usize },
    /// `a_1 + … + a_{r-1} != a_r`.
    Sum { partial: u128, last: u64 },
    /// `a_j` does not divide `2·a_r`.
    Divisibility { index: usize, value: u64 },
    Gcd { gcd: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooShort { len } => write!(f, "length {len} < 3"),
            Violation::NotPositive { index } => write!(f, "a_{} is zero", index + 1),
            Violation::NotIncreasing { index } => {
                write!(f, "not strictly increasing at a_{}", index + 1)
            }
            Violation::Sum { partial, last } => {
                write!(f, "sum condition: a_1+...+a_(r-1) = {partial} != a_r = {last}")
            }
            Violation::Divisibility { index, value } => {
                write!(f, "divisibility condition: a_{} = {value} does not divide 2*a_r", index + 1)
            }
            Violation::Gcd { gcd } => write!(f, "gcd condition: gcd = {gcd} != 1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return f.write_str("pass");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks the sum, divisibility and gcd conditions on `a_1 < … < a_r`.
pub fn validate_tuple(values: &[u64]) -> Result<ValidationReport, FormError> {
    if values.is_empty() {
        return Err(FormError::EmptyTuple);
    }
    let mut violations = Vec::new();
    let r = values.len();
    if r < 3 {
        violations.push(Violation::TooShort { len: r });
    }
    for (i, &v) in values.iter().enumerate() {
        if v == 0 {
            violations.push(Violation::NotPositive { index: i });
        }
    }
    for i in 1..r {
        if values[i] <= values[i - 1] {
            violations.push(Violation::NotIncreasing { index: i });
        }
    }
    let last = values[r - 1];
    let partial: u128 = values[..r - 1].iter().map(|&v| v as u128).sum();
    if r >= 2 && partial != last as u128 {
        violations.push(Violation::Sum { partial, last });
    }
    let twice_last = 2 * last as u128;
    for (i, &v) in values.iter().enumerate() {
        if v != 0 && twice_last % v as u128 != 0 {
            violations.push(Violation::Divisibility { index: i, value: v });
        }
    }
    let gcd = values.iter().fold(0u64, |g, &v| g.gcd(&v));
    if gcd != 1 {
        violations.push(Violation::Gcd { gcd });
    }
    Ok(ValidationReport { violations })
}

/// A validated tuple `a_1 < … < a_r` satisfying the sum, divisibility and gcd
/// conditions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoefficientTuple(Vec<u64>);

impl CoefficientTuple {
    /// Strict validation: the tuple must already be primitive.
    pub fn new(values: &[u64]) -> Result<Self, FormError> {
        let report = validate_tuple(values)?;
        if !report.passed() {
            return Err(FormError::InvalidTuple(report));
        }
        Ok(Self(values.to_vec()))
    }

    /// Divides out the gcd before validating.
    pub fn normalized(values: &[u64]) -> Result<Self, FormError> {
        if values.is_empty() {
            return Err(FormError::EmptyTuple);
        }
        let g = values.iter().fold(0u64, |g, &v| g.gcd(&v));
        if g <= 1 {
            return Self::new(values);
        }
        let reduced: Vec<u64> = values.iter().map(|v| v / g).collect();
        Self::new(&reduced)
    }

    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn r(&self) -> usize {
        self.0.len()
    }

    pub fn last(&self) -> u64 {
        self.0[self.0.len() - 1]
    }
}

/// `alpha·m + beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinearFactor {
    pub alpha: u64,
    pub beta: i64,
}

impl LinearFactor {
    pub fn unit(alpha: u64) -> Self {
        Self { alpha, beta: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Provenance {
    Theorem(Vec<u64>),
    Ukl { k: usize, l: usize },
    Wk { k: usize },
    Custom,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Theorem(a) => write!(f, "theorem:{}", join(a)),
            Provenance::Ukl { k, l } => write!(f, "ukl:{k},{l}"),
            Provenance::Wk { k } => write!(f, "wk:{k}"),
            Provenance::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for Provenance {
    type Err = FormError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FormError::Parse(format!("bad provenance `{s}`"));
        let (tag, rest) = s.split_once(':').unwrap_or((s, ""));
        match tag {
            "custom" if rest.is_empty() => Ok(Provenance::Custom),
            "theorem" => Ok(Provenance::Theorem(parse_list(rest).map_err(|_| bad())?)),
            "ukl" => match parse_list(rest).map_err(|_| bad())?.as_slice() {
                &[k, l] => Ok(Provenance::Ukl { k: k as usize, l: l as usize }),
                _ => Err(bad()),
            },
            "wk" => rest.parse().map(|k| Provenance::Wk { k }).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// A product of distinct linear factors plus the substitution `m = s·M`.
///
/// Factors are kept sorted by `(alpha, beta)`; the slopes in the verified
/// variable `M` are `s·alpha` and are guaranteed to fit in a `u64`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UniversalForm {
    factors: Vec<LinearFactor>,
    substitution: u64,
    provenance: Provenance,
}

impl UniversalForm {
    pub fn new(
        mut factors: Vec<LinearFactor>,
        substitution: u64,
        provenance: Provenance,
    ) -> Result<Self, FormError> {
        if factors.len() < 3 {
            return Err(FormError::TooFewFactors(factors.len()));
        }
        if substitution == 0 {
            return Err(FormError::ZeroSubstitution);
        }
        factors.sort_unstable();
        for w in factors.windows(2) {
            if w[0] == w[1] {
                return Err(FormError::DuplicateFactor { alpha: w[0].alpha, beta: w[0].beta });
            }
        }
        for f in &factors {
            if f.alpha == 0 {
                return Err(FormError::ZeroSlope);
            }
            f.alpha.checked_mul(substitution).ok_or(FormError::Overflow)?;
        }
        Ok(Self { factors, substitution, provenance })
    }

    /// `∏ (α_i·m + 1)` with the given substitution multiplier.
    pub fn custom(alphas: &[u64], substitution: u64) -> Result<Self, FormError> {
        let factors = alphas.iter().map(|&a| LinearFactor::unit(a)).collect();
        Self::new(factors, substitution, Provenance::Custom)
    }

    pub fn factors(&self) -> &[LinearFactor] {
        &self.factors
    }

    pub fn k(&self) -> usize {
        self.factors.len()
    }

    pub fn substitution(&self) -> u64 {
        self.substitution
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn alphas(&self) -> Vec<u64> {
        self.factors.iter().map(|f| f.alpha).collect()
    }

    /// Slopes in the substituted variable `M`.
    pub fn scaled_alphas(&self) -> Vec<u64> {
        self.factors.iter().map(|f| f.alpha * self.substitution).collect()
    }

    pub fn has_unit_intercepts(&self) -> bool {
        self.factors.iter().all(|f| f.beta == 1)
    }

    /// The same factors with one slope replaced. Used for perturbation checks.
    pub fn with_alpha(&self, index: usize, alpha: u64) -> Result<Self, FormError> {
        let mut factors = self.factors.clone();
        factors[index].alpha = alpha;
        Self::new(factors, self.substitution, Provenance::Custom)
    }

    /// Canonical one-line form: `provenance k s alpha_1,...,alpha_k`.
    pub fn to_line(&self) -> Result<String, FormError> {
        if !self.has_unit_intercepts() {
            return Err(FormError::UnsupportedForm);
        }
        Ok(format!(
            "{} {} {} {}",
            self.provenance,
            self.k(),
            self.substitution,
            join(&self.alphas())
        ))
    }
}

impl FromStr for UniversalForm {
    type Err = FormError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [prov, k, s, alphas] = fields.as_slice() else {
            return Err(FormError::Parse(format!(
                "expected 4 fields `provenance k s alphas`, got {}",
                fields.len()
            )));
        };
        let provenance: Provenance = prov.parse()?;
        let k: usize = k.parse().map_err(|_| FormError::Parse(format!("bad k `{k}`")))?;
        let s: u64 = s.parse().map_err(|_| FormError::Parse(format!("bad s `{s}`")))?;
        let alphas = parse_list(alphas)?;
        if alphas.len() != k {
            return Err(FormError::Parse(format!("k = {k} but {} slopes given", alphas.len())));
        }
        let factors = alphas.iter().map(|&a| LinearFactor::unit(a)).collect();
        Self::new(factors, s, provenance)
    }
}

impl fmt::Display for UniversalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_line() {
            Ok(line) => f.write_str(&line),
            Err(_) => {
                write!(f, "{} {} {} ", self.provenance, self.k(), self.substitution)?;
                for (i, fac) in self.factors.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{}{:+}", fac.alpha, fac.beta)?;
                }
                Ok(())
            }
        }
    }
}

/// Builds `∏_ν (2·a_r·a_ν·m + 1) · ∏_{i=1}^{k-r} (2^{i+1}·a_r²·m + 1)`.
///
/// For `k > r` the form is only universal after `m = 2^{k-r-1}·M`, which is
/// recorded as the substitution multiplier.
pub fn construct_theorem_form(a: &CoefficientTuple, k: usize) -> Result<UniversalForm, FormError> {
    theorem_factors(a, k).and_then(|(factors, s)| {
        UniversalForm::new(factors, s, Provenance::Theorem(a.values().to_vec()))
    })
}

fn theorem_factors(a: &CoefficientTuple, k: usize) -> Result<(Vec<LinearFactor>, u64), FormError> {
    let r = a.r();
    if k < r {
        return Err(FormError::FactorCountTooSmall { k, r });
    }
    let ar = a.last();
    let two_ar = ar.checked_mul(2).ok_or(FormError::Overflow)?;
    let mut factors = Vec::with_capacity(k);
    for &av in a.values() {
        factors.push(LinearFactor::unit(two_ar.checked_mul(av).ok_or(FormError::Overflow)?));
    }
    let ar2 = ar.checked_mul(ar).ok_or(FormError::Overflow)?;
    for i in 1..=(k - r) {
        let pow = 1u64.checked_shl(i as u32 + 1).filter(|_| i < 62).ok_or(FormError::Overflow)?;
        factors.push(LinearFactor::unit(pow.checked_mul(ar2).ok_or(FormError::Overflow)?));
    }
    let s = if k > r {
        1u64.checked_shl((k - r - 1) as u32).filter(|_| k - r - 1 < 64).ok_or(FormError::Overflow)?
    } else {
        1
    };
    Ok((factors, s))
}

/// The tuple `1, 2^{l-2}, 2^{j-3}(2^{l-2}+1)` for `3 ≤ j ≤ l`.
pub fn ukl_tuple(l: usize) -> Result<CoefficientTuple, FormError> {
    if l < 3 {
        return Err(FormError::BadParameter(format!("l must be at least 3, got {l}")));
    }
    if l > 32 {
        return Err(FormError::Overflow);
    }
    let base = 1u64 << (l - 2);
    let mut values = vec![1, base];
    for j in 3..=l {
        values.push((1u64 << (j - 3)) * (base + 1));
    }
    CoefficientTuple::new(&values)
}

/// `U_{k,l}`: the theorem form for [`ukl_tuple`]. `U_{k,3}` is Chernick's form.
pub fn family_ukl(k: usize, l: usize) -> Result<UniversalForm, FormError> {
    if l < 3 || k < l {
        return Err(FormError::BadParameter(format!("need 3 <= l <= k, got k = {k}, l = {l}")));
    }
    let tuple = ukl_tuple(l)?;
    let (factors, s) = theorem_factors(&tuple, k)?;
    UniversalForm::new(factors, s, Provenance::Ukl { k, l })
}

/// `W_k(m) = (6m+1) ∏_{i=1}^{k-2} (4·3^i·m+1) · (2·3^{k-1}·m+1)` with `m = 3^{k-3}·M`.
pub fn family_wk(k: usize) -> Result<UniversalForm, FormError> {
    if k < 3 {
        return Err(FormError::BadParameter(format!("k must be at least 3, got {k}")));
    }
    let pow3 = |e: usize| 3u64.checked_pow(e as u32).ok_or(FormError::Overflow);
    let mut factors = vec![LinearFactor::unit(6)];
    for i in 1..=k - 2 {
        factors.push(LinearFactor::unit(pow3(i)?.checked_mul(4).ok_or(FormError::Overflow)?));
    }
    factors.push(LinearFactor::unit(pow3(k - 1)?.checked_mul(2).ok_or(FormError::Overflow)?));
    UniversalForm::new(factors, pow3(k - 3)?, Provenance::Wk { k })
}

/// Exact coefficients `C_0 … C_k`, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolynomialExpansion {
    pub coefficients: Vec<BigInt>,
}

impl PolynomialExpansion {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn evaluate(&self, x: &BigInt) -> BigInt {
        self.coefficients
            .iter()
            .rev()
            .fold(BigInt::zero(), |acc, c| acc * x + c)
    }
}

/// Expands `∏ (α_i·x + β_i)`; with `substituted` the slopes are `s·α_i`.
pub fn expand_coefficients(form: &UniversalForm, substituted: bool) -> PolynomialExpansion {
    let s = if substituted { form.substitution } else { 1 };
    expand_factors(form.factors.iter().map(|f| (BigInt::from(f.alpha) * s, BigInt::from(f.beta))))
}

pub(crate) fn expand_factors(factors: impl IntoIterator<Item = (BigInt, BigInt)>) -> PolynomialExpansion {
    let mut coeffs = vec![BigInt::one()];
    for (a, b) in factors {
        let mut next = vec![BigInt::zero(); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += c * &b;
            next[i + 1] += c * &a;
        }
        coeffs = next;
    }
    PolynomialExpansion { coefficients: coeffs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorOutcome {
    /// Every coefficient of `(U(M) − 1)/M` is divisible by the modulus.
    CoefficientDivisibility,
    /// All residues `M mod s·α_i` were checked.
    Enumerated,
    Counterexample { m: u64 },
    /// Modulus above [`ENUMERATION_LIMIT`] and the coefficient test failed.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactorCheck {
    /// `s·α_i`.
    pub modulus: u64,
    pub outcome: FactorOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Verified,
    /// Smallest counterexample over all factors.
    Refuted { factor: usize, m: u64 },
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub checks: Vec<FactorCheck>,
}

impl VerificationReport {
    pub fn verdict(&self) -> Verdict {
        let refuted = self
            .checks
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c.outcome {
                FactorOutcome::Counterexample { m } => Some((m, i)),
                _ => None,
            })
            .min();
        if let Some((m, factor)) = refuted {
            return Verdict::Refuted { factor, m };
        }
        if self.checks.iter().any(|c| c.outcome == FactorOutcome::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Verified
        }
    }

    pub fn is_verified(&self) -> bool {
        self.verdict() == Verdict::Verified
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.verdict() {
            Verdict::Verified => f.write_str("verified"),
            Verdict::Inconclusive => f.write_str("inconclusive"),
            Verdict::Refuted { factor, m } => write!(
                f,
                "not verified: U(M) - 1 is not divisible by {}*M at M = {m}",
                self.checks[factor].modulus
            ),
        }
    }
}

/// Decides whether `s·α_i·M | U(M) − 1` for every factor and every `M ≥ 1`.
///
/// With `U(M) − 1 = M·Q(M)` this is `s·α_i | Q(M)`, which only depends on
/// `M mod s·α_i`. The coefficient test is tried first; otherwise every residue
/// is enumerated, up to [`ENUMERATION_LIMIT`].
pub fn verify_universal(form: &UniversalForm) -> Result<VerificationReport, FormError> {
    if !form.has_unit_intercepts() {
        return Err(FormError::UnsupportedForm);
    }
    let expansion = expand_coefficients(form, true);
    let q = &expansion.coefficients[1..];
    let checks = form
        .scaled_alphas()
        .into_iter()
        .map(|modulus| FactorCheck { modulus, outcome: check_modulus(q, modulus) })
        .collect();
    Ok(VerificationReport { checks })
}

fn check_modulus(q: &[BigInt], modulus: u64) -> FactorOutcome {
    let n = BigInt::from(modulus);
    if q.iter().all(|c| c.is_multiple_of(&n)) {
        return FactorOutcome::CoefficientDivisibility;
    }
    if modulus > ENUMERATION_LIMIT {
        return FactorOutcome::Inconclusive;
    }
    let reduced: Vec<u64> = q
        .iter()
        .map(|c| c.mod_floor(&n).to_u64().expect("residue below modulus"))
        .collect();
    let n = modulus as u128;
    for m in 1..=modulus {
        let x = m as u128 % n;
        let value = reduced.iter().rev().fold(0u128, |acc, &c| (acc * x + c as u128) % n);
        if value != 0 {
            return FactorOutcome::Counterexample { m };
        }
    }
    FactorOutcome::Enumerated
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub factors: Vec<BigInt>,
    pub product: BigInt,
}

/// Factor values `s·α_i·M + β_i` and their product.
pub fn evaluate(form: &UniversalForm, m: u64) -> Result<Evaluation, FormError> {
    if m == 0 {
        return Err(FormError::ZeroArgument);
    }
    let m = BigInt::from(m);
    let factors: Vec<BigInt> = form
        .factors
        .iter()
        .map(|f| BigInt::from(f.alpha) * form.substitution * &m + f.beta)
        .collect();
    let product = factors.iter().product();
    Ok(Evaluation { factors, product })
}

fn join(values: &[u64]) -> String {
    values.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

pub(crate) fn parse_list(s: &str) -> Result<Vec<u64>, FormError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| FormError::Parse(format!("bad integer `{t}`")))
        })
        .collect()
}
