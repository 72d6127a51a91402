//! Primality services for the search loop and the prime products.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::forms::UniversalForm;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrimalityError {
    #[error("sieve limit must be at least 2, got {0}")]
    LimitTooSmall(u64),
    #[error("probable-prime test needs a positive integer")]
    NonPositive,
    #[error("at least one Miller-Rabin round is required")]
    ZeroRounds,
    #[error("wheel modulus overflows 64 bits")]
    WheelOverflow,
    #[error("wheel modulus {0} is too large to enumerate")]
    WheelTooLarge(u64),
    #[error("wheel entry {0} is not prime")]
    NotPrime(u64),
    #[error("wheel prime {0} listed twice")]
    DuplicatePrime(u64),
}

/// All primes up to `limit`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
}

impl PrimeTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        self.primes.binary_search(&n).is_ok()
    }

    /// Primes `≤ bound` (bound may be below the table limit).
    pub fn up_to(&self, bound: u64) -> &[u64] {
        let end = self.primes.partition_point(|&p| p <= bound);
        &self.primes[..end]
    }
}

/// Odd numbers per sieve segment.
const SEGMENT: usize = 1 << 16;

/// Segmented sieve of Eratosthenes over odd numbers.
pub fn sieve_primes(limit: u64) -> Result<PrimeTable, PrimalityError> {
    if limit < 2 {
        return Err(PrimalityError::LimitTooSmall(limit));
    }
    let root = isqrt(limit);
    let base = simple_sieve(root);
    let mut primes = vec![2];
    // segment covers odd n = 2*(start+i)+1
    let odd_count = (limit - 1) / 2; // odd numbers 3..=limit
    let mut seg = vec![true; SEGMENT];
    let mut start = 1u64;
    while start <= odd_count {
        let len = SEGMENT.min((odd_count - start + 1) as usize);
        seg[..len].fill(true);
        let lo = 2 * start + 1;
        let hi = 2 * (start + len as u64 - 1) + 1;
        for &p in base.iter().skip(1) {
            if p * p > hi {
                break;
            }
            let mut first = (p * p).max(lo.div_ceil(p) * p);
            if first % 2 == 0 {
                first += p;
            }
            let mut idx = ((first - 1) / 2 - start) as usize;
            while idx < len {
                seg[idx] = false;
                idx += p as usize;
            }
        }
        primes.extend(
            seg[..len]
                .iter()
                .enumerate()
                .filter(|(_, &is_p)| is_p)
                .map(|(i, _)| 2 * (start + i as u64) + 1),
        );
        start += len as u64;
    }
    Ok(PrimeTable { limit, primes })
}

fn simple_sieve(limit: u64) -> Vec<u64> {
    let n = limit as usize;
    let mut is_p = vec![true; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if is_p[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                is_p[j] = false;
                j += i;
            }
        }
    }
    out
}

pub(crate) fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

/// Montgomery arithmetic modulo an odd `u64`, with `R = 2^64`.
#[derive(Debug, Clone, Copy)]
struct Montgomery {
    n: u64,
    /// `n^{-1} mod 2^64`
    n_inv: u64,
    /// `R^2 mod n`
    r2: u64,
}

impl Montgomery {
    fn new(n: u64) -> Self {
        debug_assert!(n & 1 == 1);
        let mut inv = n;
        for _ in 0..5 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(n.wrapping_mul(inv)));
        }
        let r2 = ((n as u128).wrapping_neg() % n as u128) as u64;
        Self { n, n_inv: inv, r2 }
    }

    #[inline]
    fn reduce(&self, t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(self.n_inv);
        let mn = (m as u128 * self.n as u128) >> 64;
        let (res, borrow) = ((t >> 64) as u64).overflowing_sub(mn as u64);
        if borrow {
            res.wrapping_add(self.n)
        } else {
            res
        }
    }

    #[inline]
    fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce(a as u128 * b as u128)
    }

    fn to_mont(&self, a: u64) -> u64 {
        self.mul(a % self.n, self.r2)
    }

    fn pow(&self, base: u64, mut exp: u64) -> u64 {
        let mut result = self.to_mont(1);
        let mut b = base;
        while exp > 0 {
            if exp & 1 == 1 {
                result = self.mul(result, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        result
    }
}

const SMALL_PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Sinclair's seven bases; the strong-probable-prime test to all of them has no
/// composite pseudoprime below 2^64.
const WITNESSES_64: [u64; 7] = [2, 325, 9375, 28178, 450775, 9780504, 1795265022];

/// Deterministic primality for every `u64`.
pub fn is_prime_64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in SMALL_PRIMES {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    if n < 59 * 59 {
        return true;
    }
    let mont = Montgomery::new(n);
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    let one = mont.to_mont(1);
    let minus_one = mont.to_mont(n - 1);
    'witness: for a in WITNESSES_64 {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = mont.pow(mont.to_mont(a), d);
        if x == one || x == minus_one {
            continue;
        }
        for _ in 1..s {
            x = mont.mul(x, x);
            if x == minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Miller–Rabin with `rounds` pseudo-random bases.
///
/// The bases come from a ChaCha stream seeded by the bytes of `n`, so the
/// answer for a given `n` never changes between runs.
pub fn is_probable_prime_big(n: &BigInt, rounds: u32) -> Result<bool, PrimalityError> {
    if n.sign() != Sign::Plus {
        return Err(PrimalityError::NonPositive);
    }
    if rounds == 0 {
        return Err(PrimalityError::ZeroRounds);
    }
    let n = n.magnitude();
    if let Some(small) = n.to_u64() {
        if small < 4 {
            return Ok(small >= 2);
        }
    }
    for p in SMALL_PRIMES {
        if *n == BigUint::from(p) {
            return Ok(true);
        }
        if (n % p).is_zero() {
            return Ok(false);
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let span = n - 3u32; // bases in [2, n-2]
    let mut rng = ChaCha8Rng::seed_from_u64(seed_from(n));
    let mut buf = vec![0u8; (n.bits() as usize).div_ceil(8) + 8];
    'round: for _ in 0..rounds {
        rng.fill_bytes(&mut buf);
        let a = BigUint::from_bytes_le(&buf) % &span + 2u32;
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'round;
            }
        }
        return Ok(false);
    }
    Ok(true)
}

fn seed_from(n: &BigUint) -> u64 {
    // FNV-1a over the little-endian bytes
    n.to_bytes_le()
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Residues `M mod W` for which no factor of a form is divisible by a wheel prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueWheel {
    primes: Vec<u64>,
    modulus: u64,
    residues: Vec<u64>,
    /// `M ≥ 1` where some factor value equals a wheel prime.
    exceptions: Vec<u64>,
}

/// Wheels above this modulus are rejected rather than enumerated.
pub const MAX_WHEEL_MODULUS: u64 = 1 << 32;

pub const DEFAULT_WHEEL_PRIMES: [u64; 4] = [3, 7, 11, 13];

/// The default wheel primes that constrain at least one factor of `form`.
pub fn default_wheel_primes(form: &UniversalForm) -> Vec<u64> {
    let scaled = form.scaled_alphas();
    DEFAULT_WHEEL_PRIMES
        .into_iter()
        .filter(|&p| scaled.iter().any(|a| a % p != 0))
        .collect()
}

pub fn build_wheel(form: &UniversalForm, primes: &[u64]) -> Result<ResidueWheel, PrimalityError> {
    let mut modulus = 1u64;
    for (i, &p) in primes.iter().enumerate() {
        if !is_prime_64(p) {
            return Err(PrimalityError::NotPrime(p));
        }
        if primes[..i].contains(&p) {
            return Err(PrimalityError::DuplicatePrime(p));
        }
        modulus = modulus.checked_mul(p).ok_or(PrimalityError::WheelOverflow)?;
    }
    if modulus > MAX_WHEEL_MODULUS {
        return Err(PrimalityError::WheelTooLarge(modulus));
    }
    let scaled = form.scaled_alphas();
    let forbidden: Vec<Vec<bool>> = primes
        .iter()
        .map(|&p| {
            let mut bad = vec![false; p as usize];
            for (a, f) in scaled.iter().zip(form.factors()) {
                let a = a % p;
                let b = f.beta.rem_euclid(p as i64) as u64;
                if a == 0 {
                    if b == 0 {
                        bad.fill(true);
                    }
                    continue;
                }
                let root = (p - b) % p * mod_inverse(a, p) % p;
                bad[root as usize] = true;
            }
            bad
        })
        .collect();
    let residues: Vec<u64> = (0..modulus)
        .filter(|&r| primes.iter().zip(&forbidden).all(|(&p, bad)| !bad[(r % p) as usize]))
        .collect();
    let mut exceptions = Vec::new();
    for &p in primes {
        for (a, f) in scaled.iter().zip(form.factors()) {
            let diff = p as i128 - f.beta as i128;
            if diff > 0 && diff % *a as i128 == 0 {
                exceptions.push((diff / *a as i128) as u64);
            }
        }
    }
    exceptions.sort_unstable();
    exceptions.dedup();
    Ok(ResidueWheel { primes: primes.to_vec(), modulus, residues, exceptions })
}

impl ResidueWheel {
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn exceptions(&self) -> &[u64] {
        &self.exceptions
    }

    pub fn is_admissible(&self, m: u64) -> bool {
        self.residues.binary_search(&(m % self.modulus)).is_ok()
    }

    /// Values of `M` in `[lo, hi]` that survive the wheel, ascending.
    pub fn candidates(&self, lo: u64, hi: u64) -> Vec<u64> {
        let mut out = Vec::new();
        if lo > hi {
            return out;
        }
        let mut base = lo - lo % self.modulus;
        'outer: loop {
            for &r in &self.residues {
                let m = match base.checked_add(r) {
                    Some(m) => m,
                    None => break 'outer,
                };
                if m > hi {
                    break 'outer;
                }
                if m >= lo {
                    out.push(m);
                }
            }
            base = match base.checked_add(self.modulus) {
                Some(b) if b <= hi => b,
                _ => break,
            };
        }
        let extra: Vec<u64> = self
            .exceptions
            .iter()
            .copied()
            .filter(|&m| m >= lo && m <= hi && !self.is_admissible(m))
            .collect();
        if !extra.is_empty() {
            out.extend(extra);
            out.sort_unstable();
        }
        out
    }
}

/// Inverse of `a` modulo prime `p`, `a ≠ 0 mod p`.
pub(crate) fn mod_inverse(a: u64, p: u64) -> u64 {
    let e = i128::extended_gcd(&(a as i128), &(p as i128));
    debug_assert!(e.gcd.is_one());
    e.x.rem_euclid(p as i128) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{family_ukl, UniversalForm};

    fn trial_division(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn sieve_examples() {
        assert_eq!(sieve_primes(10).unwrap().primes(), &[2, 3, 5, 7]);
        assert_eq!(sieve_primes(2).unwrap().primes(), &[2]);
        assert_eq!(sieve_primes(3).unwrap().primes(), &[2, 3]);
        assert_eq!(sieve_primes(100).unwrap().len(), 25);
        assert_eq!(sieve_primes(1), Err(PrimalityError::LimitTooSmall(1)));
    }

    #[test]
    fn sieve_matches_trial_division_to_one_million() {
        let table = sieve_primes(1_000_000).unwrap();
        let oracle: Vec<u64> = (2..=1_000_000).filter(|&n| trial_division(n)).collect();
        assert_eq!(oracle.len(), 78498);
        assert_eq!(table.primes(), oracle.as_slice());
    }

    #[test]
    fn sieve_segment_boundaries() {
        for limit in [SEGMENT as u64 * 2 - 1, SEGMENT as u64 * 2, SEGMENT as u64 * 2 + 1, 131_073] {
            let t = sieve_primes(limit).unwrap();
            let expect = (2..=limit).filter(|&n| trial_division(n)).count();
            assert_eq!(t.len(), expect, "limit {limit}");
        }
    }

    #[test]
    fn prime_64_examples() {
        assert!(!is_prime_64(0));
        assert!(!is_prime_64(1));
        assert!(is_prime_64(2));
        assert!(!is_prime_64(561));
        assert!(is_prime_64(104_729));
        assert!(is_prime_64(18_446_744_073_709_551_557)); // largest u64 prime
        assert!(!is_prime_64(u64::MAX));
        // strong pseudoprime to bases 2, 3, 5, 7, 11, 13, 17, 19, 23
        assert!(!is_prime_64(3_825_123_056_546_413_051));
        // 4294967291^2
        assert!(!is_prime_64(18_446_744_030_759_878_681));
    }

    #[test]
    fn montgomery_matches_u128() {
        for n in [3u64, 1_000_000_007, 18_446_744_073_709_551_557, (1 << 63) + 1] {
            let m = Montgomery::new(n);
            for (a, e) in [(2u64, 10u64), (12345, n - 1), (n - 1, 3)] {
                let mut expect = 1u128;
                let mut b = a as u128 % n as u128;
                let mut k = e;
                while k > 0 {
                    if k & 1 == 1 {
                        expect = expect * b % n as u128;
                    }
                    b = b * b % n as u128;
                    k >>= 1;
                }
                let got = m.reduce(m.pow(m.to_mont(a), e) as u128);
                assert_eq!(got as u128, expect, "{a}^{e} mod {n}");
            }
        }
    }

    #[test]
    fn big_examples() {
        assert!(!is_probable_prime_big(&BigInt::from(1729), 20).unwrap());
        let m89 = (BigInt::one() << 89) - 1;
        assert!(is_probable_prime_big(&m89, 40).unwrap());
        let m89_sq = &m89 * &m89;
        assert!(!is_probable_prime_big(&m89_sq, 40).unwrap());
        assert!(!is_probable_prime_big(&((BigInt::one() << 100) + 2), 5).unwrap());
        assert_eq!(is_probable_prime_big(&BigInt::zero(), 5), Err(PrimalityError::NonPositive));
        assert_eq!(is_probable_prime_big(&BigInt::from(-7), 5), Err(PrimalityError::NonPositive));
        assert_eq!(is_probable_prime_big(&BigInt::from(7), 0), Err(PrimalityError::ZeroRounds));
        assert!(is_probable_prime_big(&BigInt::from(2), 1).unwrap());
        assert!(!is_probable_prime_big(&BigInt::from(1), 1).unwrap());
    }

    #[test]
    fn wheel_u44_mod_3() {
        let w = build_wheel(&family_ukl(4, 4).unwrap(), &[3]).unwrap();
        assert_eq!(w.residues(), &[0]);
        // 20M+1 = 3 has no integer solution; no exceptions
        assert!(w.exceptions().is_empty());
    }

    #[test]
    fn wheel_mod_2_keeps_everything_for_even_slopes() {
        let w = build_wheel(&family_ukl(4, 4).unwrap(), &[2]).unwrap();
        assert_eq!(w.residues(), &[0, 1]);
    }

    #[test]
    fn wheel_chernick_mod_5_by_enumeration() {
        let form = family_ukl(3, 3).unwrap();
        let w = build_wheel(&form, &[5]).unwrap();
        let expect: Vec<u64> = (0..5)
            .filter(|m| [6, 12, 18].iter().all(|a| (a * m + 1) % 5 != 0))
            .collect();
        assert_eq!(w.residues(), expect.as_slice());
    }

    #[test]
    fn wheel_exceptions_and_candidates() {
        // 6M+1 = 7 at M = 1, 12M+1 = 13 at M = 1, 6M+1 = 13 at M = 2
        let form = UniversalForm::custom(&[6, 12, 18], 1).unwrap();
        let w = build_wheel(&form, &[7, 13]).unwrap();
        assert_eq!(w.exceptions(), &[1, 2]);
        let c = w.candidates(1, 200);
        assert_eq!(c[0], 1);
        assert!(c.windows(2).all(|p| p[0] < p[1]));
        for m in 1..=200u64 {
            let admissible = [6u64, 12, 18]
                .iter()
                .all(|a| (a * m + 1) % 7 != 0 && (a * m + 1) % 13 != 0);
            assert_eq!(c.contains(&m), admissible || m <= 2, "M = {m}");
        }
    }

    #[test]
    fn wheel_errors() {
        let form = family_ukl(4, 4).unwrap();
        assert_eq!(build_wheel(&form, &[4]), Err(PrimalityError::NotPrime(4)));
        assert_eq!(build_wheel(&form, &[3, 3]), Err(PrimalityError::DuplicatePrime(3)));
        let many: Vec<u64> = sieve_primes(100).unwrap().primes().to_vec();
        assert_eq!(build_wheel(&form, &many), Err(PrimalityError::WheelOverflow));
    }

    #[test]
    fn default_wheel_drops_primes_dividing_all_slopes() {
        let w4 = crate::forms::family_wk(4).unwrap();
        assert_eq!(default_wheel_primes(&w4), vec![7, 11, 13]);
        assert_eq!(default_wheel_primes(&family_ukl(4, 4).unwrap()), vec![3, 7, 11, 13]);
    }
}
