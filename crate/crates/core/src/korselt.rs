//! Korselt's criterion with a supplied factorization, and a brute-force
//! Fermat oracle for small `N`.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use thiserror::Error;

use crate::primality::{is_prime_64, is_probable_prime_big};

/// Miller–Rabin rounds for factors that do not fit in 64 bits.
pub const BIG_FACTOR_ROUNDS: u32 = 64;

/// Default upper bound for [`carmichael_oracle`].
pub const ORACLE_BOUND: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KorseltError {
    #[error("factor list is empty")]
    NoFactors,
    #[error("factors multiply to {product}, not {n}")]
    ProductMismatch { n: BigInt, product: BigInt },
    #[error("{n} exceeds the oracle bound {bound}")]
    AboveBound { n: u64, bound: u64 },
    #[error("cannot parse certificate line: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorRecord {
    pub factor: BigInt,
    pub prime: bool,
    pub distinct: bool,
    /// `(p − 1) | (N − 1)`.
    pub divides: bool,
}

/// An accepted Korselt certificate: `N` odd, squarefree with at least three
/// prime factors, and `p − 1 | N − 1` for each of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarmichaelCertificate {
    pub n: BigInt,
    pub checks: Vec<FactorRecord>,
}

impl CarmichaelCertificate {
    pub fn factors(&self) -> impl Iterator<Item = &BigInt> {
        self.checks.iter().map(|c| &c.factor)
    }
}

impl fmt::Display for CarmichaelCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.n)?;
        for p in self.factors() {
            write!(f, " {p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    Even,
    TooFewFactors(usize),
    NotPrime(BigInt),
    Repeated(BigInt),
    /// `p − 1` does not divide `N − 1`.
    NotDividing(BigInt),
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::Even => f.write_str("N is even"),
            Rejection::TooFewFactors(n) => write!(f, "only {n} prime factor(s), need at least 3"),
            Rejection::NotPrime(p) => write!(f, "factor {p} is not prime"),
            Rejection::Repeated(p) => write!(f, "factor {p} repeated, N is not squarefree"),
            Rejection::NotDividing(p) => write!(f, "{p} - 1 does not divide N - 1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KorseltOutcome {
    Accepted(CarmichaelCertificate),
    Rejected(Vec<Rejection>),
}

impl KorseltOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, KorseltOutcome::Accepted(_))
    }

    pub fn certificate(self) -> Option<CarmichaelCertificate> {
        match self {
            KorseltOutcome::Accepted(c) => Some(c),
            KorseltOutcome::Rejected(_) => None,
        }
    }
}

fn is_prime_factor(p: &BigInt) -> bool {
    if !p.is_positive() {
        return false;
    }
    match p.to_u64() {
        Some(small) => is_prime_64(small),
        None => is_probable_prime_big(p, BIG_FACTOR_ROUNDS).unwrap_or(false),
    }
}

/// Applies Korselt's criterion to `n` with the claimed factorization.
///
/// A wrong product is an argument error; a correct product that fails the
/// criterion is a [`KorseltOutcome::Rejected`] listing every failed check.
pub fn korselt_check(n: &BigInt, factors: &[BigInt]) -> Result<KorseltOutcome, KorseltError> {
    if factors.is_empty() {
        return Err(KorseltError::NoFactors);
    }
    let product: BigInt = factors.iter().product();
    if product != *n {
        return Err(KorseltError::ProductMismatch { n: n.clone(), product });
    }
    let n_minus_1: BigInt = n - 1;
    let mut reasons = Vec::new();
    if n.is_even() {
        reasons.push(Rejection::Even);
    }
    let mut checks = Vec::with_capacity(factors.len());
    for (i, p) in factors.iter().enumerate() {
        let prime = is_prime_factor(p);
        let distinct = !factors[..i].contains(p);
        let divides = p > &BigInt::one() && n_minus_1.is_multiple_of(&(p - 1));
        if !prime {
            reasons.push(Rejection::NotPrime(p.clone()));
        }
        if !distinct {
            reasons.push(Rejection::Repeated(p.clone()));
        }
        if prime && !divides {
            reasons.push(Rejection::NotDividing(p.clone()));
        }
        checks.push(FactorRecord { factor: p.clone(), prime, distinct, divides });
    }
    if factors.len() < 3 {
        reasons.push(Rejection::TooFewFactors(factors.len()));
    }
    if reasons.is_empty() {
        Ok(KorseltOutcome::Accepted(CarmichaelCertificate { n: n.clone(), checks }))
    } else {
        Ok(KorseltOutcome::Rejected(reasons))
    }
}

/// Parses a certificate line `N factor_1 ... factor_k`.
pub fn parse_certificate_line(line: &str) -> Result<(BigInt, Vec<BigInt>), KorseltError> {
    let mut values = line.split_whitespace().map(|t| {
        t.parse::<BigInt>()
            .map_err(|_| KorseltError::Parse(format!("bad integer `{t}`")))
    });
    let n = values
        .next()
        .ok_or_else(|| KorseltError::Parse("empty line".into()))??;
    let factors = values.collect::<Result<Vec<_>, _>>()?;
    Ok((n, factors))
}

/// Fermat-definition oracle with the default bound.
pub fn carmichael_oracle(n: u64) -> Result<bool, KorseltError> {
    carmichael_oracle_bounded(n, ORACLE_BOUND)
}

/// `true` iff `n` is composite and `a^{n−1} ≡ 1 (mod n)` for every `1 < a < n`
/// coprime to `n`.
///
/// Runs the literal loop over all bases, stopping at the first failure, so
/// non-Carmichael numbers are usually rejected by `a = 2`.
pub fn carmichael_oracle_bounded(n: u64, bound: u64) -> Result<bool, KorseltError> {
    if n > bound {
        return Err(KorseltError::AboveBound { n, bound });
    }
    if n < 4 || !is_composite_by_trial_division(n) {
        return Ok(false);
    }
    for a in 2..n {
        if a.gcd(&n) != 1 {
            continue;
        }
        if pow_mod(a, n - 1, n) != 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn is_composite_by_trial_division(n: u64) -> bool {
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return true;
        }
        d += 1;
    }
    false
}

fn pow_mod(base: u64, mut exp: u64, n: u64) -> u64 {
    let n = n as u128;
    let mut result = 1u128;
    let mut b = base as u128 % n;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * b % n;
        }
        b = b * b % n;
        exp >>= 1;
    }
    result as u64
}
