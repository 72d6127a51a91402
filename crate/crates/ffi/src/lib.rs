//! C ABI over `carmichael-core`.
//!
//! Forms are opaque `CmForm` handles created by the `cm_form_*` constructors
//! and released with [`cm_form_free`]. Every fallible call returns a
//! [`CmStatus`]; on failure [`cm_last_error`] describes the problem for the
//! calling thread. Panics are caught at the boundary and reported as
//! `CM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use carmichael_core::estimate::{estimate_by_sum, singular_constant};
use carmichael_core::forms::{construct_theorem_form, family_ukl, family_wk, verify_universal, CoefficientTuple};
use carmichael_core::korselt::korselt_check;
use carmichael_core::primality::{build_wheel, default_wheel_primes, is_prime_64};
use carmichael_core::search::{search_range, SearchOptions};
use carmichael_core::UniversalForm;
use num_bigint::BigInt;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotVerified = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Opaque handle to a universal form.
pub struct CmForm(UniversalForm);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(CmStatus, String);

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(CmStatus::InvalidArgument, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CmStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside carmichael-ffi");
            CmStatus::Panic
        }
    }
}

unsafe fn form_ref<'a>(form: *const CmForm) -> Result<&'a UniversalForm, Failure> {
    form.as_ref().map(|f| &f.0).ok_or_else(|| null("form"))
}

unsafe fn slice<'a>(data: *const u64, len: usize, what: &str) -> Result<&'a [u64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn emit(form: UniversalForm, out: *mut *mut CmForm) -> Result<(), Failure> {
    *out = Box::into_raw(Box::new(CmForm(form)));
    Ok(())
}

/// Message for the last failed call on this thread, or an empty string.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn cm_form_ukl(k: usize, l: usize, out: *mut *mut CmForm) -> CmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit(family_ukl(k, l)?, out)
    })
}

/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn cm_form_wk(k: usize, out: *mut *mut CmForm) -> CmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit(family_wk(k)?, out)
    })
}

/// Theorem form from a coefficient tuple; `k = 0` means `k = len`.
///
/// # Safety
/// `tuple` must point to `len` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_form_theorem(
    tuple: *const u64,
    len: usize,
    k: usize,
    out: *mut *mut CmForm,
) -> CmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let tuple = CoefficientTuple::new(slice(tuple, len, "tuple")?)?;
        let k = if k == 0 { tuple.r() } else { k };
        emit(construct_theorem_form(&tuple, k)?, out)
    })
}

/// # Safety
/// `alphas` must point to `len` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_form_custom(
    alphas: *const u64,
    len: usize,
    substitution: u64,
    out: *mut *mut CmForm,
) -> CmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit(UniversalForm::custom(slice(alphas, len, "alphas")?, substitution)?, out)
    })
}

/// Parses a form line `provenance k s a1,...,ak`.
///
/// # Safety
/// `line` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_form_parse(line: *const c_char, out: *mut *mut CmForm) -> CmStatus {
    guard(|| {
        if line.is_null() {
            return Err(null("line"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(line).to_str()?;
        emit(text.parse()?, out)
    })
}

/// # Safety
/// `form` must be null or a handle from a `cm_form_*` constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn cm_form_free(form: *mut CmForm) {
    if !form.is_null() {
        drop(Box::from_raw(form));
    }
}

/// Number of factors, or 0 for a null handle.
///
/// # Safety
/// `form` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_form_k(form: *const CmForm) -> usize {
    form.as_ref().map_or(0, |f| f.0.k())
}

/// Substitution multiplier, or 0 for a null handle.
///
/// # Safety
/// `form` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cm_form_substitution(form: *const CmForm) -> u64 {
    form.as_ref().map_or(0, |f| f.0.substitution())
}

/// Copies the slopes into `buf`. `*len` receives `k` even when `cap` is too
/// small, in which case `CM_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `buf` must have room for `cap` values; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_form_alphas(form: *const CmForm, buf: *mut u64, cap: usize, len: *mut usize) -> CmStatus {
    guard(|| copy_out(&form_ref(form)?.alphas(), buf, cap, len))
}

unsafe fn copy_out(values: &[u64], buf: *mut u64, cap: usize, len: *mut usize) -> Result<(), Failure> {
    if len.is_null() {
        return Err(null("len"));
    }
    *len = values.len();
    if values.len() > cap {
        return Err(Failure(
            CmStatus::BufferTooSmall,
            format!("need room for {} values, got {cap}", values.len()),
        ));
    }
    if !values.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    Ok(())
}

/// The form line; free it with [`cm_string_free`].
///
/// # Safety
/// `form` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_form_to_string(form: *const CmForm, out: *mut *mut c_char) -> CmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let line = form_ref(form)?.to_string();
        *out = CString::new(line)?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn cm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Sets `*verified` and returns `CM_STATUS_OK` for both outcomes; an
/// inconclusive check counts as not verified.
///
/// # Safety
/// `form` must be a live handle and `verified` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_verify(form: *const CmForm, verified: *mut bool) -> CmStatus {
    guard(|| {
        if verified.is_null() {
            return Err(null("verified"));
        }
        let report = verify_universal(form_ref(form)?)?;
        *verified = report.is_verified();
        Ok(())
    })
}

fn hits(form: &UniversalForm, lo: u64, hi: u64, threads: usize) -> Result<Vec<u64>, Failure> {
    let wheel = build_wheel(form, &default_wheel_primes(form))?;
    let opts = SearchOptions { wheel: Some(&wheel), threads, ..SearchOptions::default() };
    match search_range(form, lo, hi, &opts) {
        Ok(h) => Ok(h.into_iter().map(|h| h.m).collect()),
        Err(e @ carmichael_core::search::SearchError::NotVerified(_)) => Err(Failure(CmStatus::NotVerified, e.to_string())),
        Err(e) => Err(e.into()),
    }
}

/// Number of `M` in `[lo, hi]` with every factor prime. `threads = 0` uses
/// one worker per core.
///
/// # Safety
/// `form` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_search_count(
    form: *const CmForm,
    lo: u64,
    hi: u64,
    threads: usize,
    count: *mut u64,
) -> CmStatus {
    guard(|| {
        if count.is_null() {
            return Err(null("count"));
        }
        *count = hits(form_ref(form)?, lo, hi, threads)?.len() as u64;
        Ok(())
    })
}

/// The hit values `M` in ascending order; same buffer contract as
/// [`cm_form_alphas`].
///
/// # Safety
/// `form` must be a live handle, `buf` must have room for `cap` values and
/// `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_search_hits(
    form: *const CmForm,
    lo: u64,
    hi: u64,
    threads: usize,
    buf: *mut u64,
    cap: usize,
    len: *mut usize,
) -> CmStatus {
    guard(|| copy_out(&hits(form_ref(form)?, lo, hi, threads)?, buf, cap, len))
}

#[no_mangle]
pub extern "C" fn cm_is_prime_u64(n: u64) -> bool {
    is_prime_64(n)
}

/// Korselt's criterion for `n` with the claimed factorization. A product
/// mismatch is `CM_STATUS_INVALID_ARGUMENT`; a failed criterion sets
/// `*accepted = false`.
///
/// # Safety
/// `factors` must point to `len` readable values and `accepted` be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_korselt_u64(n: u64, factors: *const u64, len: usize, accepted: *mut bool) -> CmStatus {
    guard(|| {
        if accepted.is_null() {
            return Err(null("accepted"));
        }
        let factors: Vec<BigInt> = slice(factors, len, "factors")?.iter().map(|&p| BigInt::from(p)).collect();
        *accepted = korselt_check(&BigInt::from(n), &factors)?.is_accepted();
        Ok(())
    })
}

/// Singular-series constant with primes up to `cutoff` (at least 100).
///
/// # Safety
/// `form` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_singular_constant(form: *const CmForm, cutoff: u64, out: *mut f64) -> CmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = singular_constant(form_ref(form)?, cutoff)?.value;
        Ok(())
    })
}

/// `constant · Σ_{M'≤M} ∏ 1/log(s·α_i·M' + 1)`.
///
/// # Safety
/// `form` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_estimate_sum(form: *const CmForm, constant: f64, m: u64, out: *mut f64) -> CmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = estimate_by_sum(form_ref(form)?, constant, m)?.e;
        Ok(())
    })
}
