//! Universal forms for Carmichael numbers.
//!
//! A universal form is a product of linear factors `U(M) = ∏ (s·α_i·M + 1)` such
//! that `U(M) ≡ 1 (mod s·α_i·M)` for every `M`. Whenever all factors are prime
//! at once, Korselt's criterion makes `U(M)` a Carmichael number.
//!
//! The crate is split along the pipeline:
//!
//! - [`forms`]: coefficient tuples, the three form families, exact polynomial
//!   expansion and the symbolic universality check.
//! - [`primality`]: segmented sieve, deterministic 64-bit Miller–Rabin,
//!   big-integer probable-prime test and residue wheels.
//! - [`korselt`]: Korselt certificates and a brute-force Fermat oracle.
//! - [`search`]: parallel range scans, decade counts and resumable checkpoints.
//! - [`estimate`]: singular-series constants, Dubner-style expected counts and
//!   the logarithmic integral.
//! - [`cli`]: the `carmichael` command line front end.

pub mod cli;
pub mod estimate;
pub mod forms;
pub mod korselt;
pub mod primality;
pub mod search;

pub use forms::{CoefficientTuple, LinearFactor, Provenance, UniversalForm};
pub use korselt::CarmichaelCertificate;
pub use search::{CandidateHit, SearchCheckpoint};
