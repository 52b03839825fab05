//! C ABI for the tax engine and the elasticity arithmetic.
//!
//! Every fallible function returns a [`TrStatus`] and writes its result through
//! an out-pointer. On failure the message is available from
//! [`tr_last_error_message`] on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use taxreform::design::normalized_difference;
use taxreform::estimate::elasticity;
use taxreform::tax::{
    bracket_location, deflate_system, effective_mtr, mechanical_ntr_change, statutory_mtr,
    tax_liability, BracketLocation, IncomeRecord, SpouseIncome, TaxSystem,
};
use taxreform::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidRecord = 2,
    InvalidSystem = 3,
    InvalidFactor = 4,
    RateAtOrAboveOne = 5,
    ZeroContrast = 6,
    Degenerate = 7,
    Io = 8,
    InvalidUtf8 = 9,
    Panic = 10,
    Other = 11,
}

/// Highest national bracket in which a filer is liable.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrBracket {
    None = 0,
    Bottom = 1,
    Middle = 2,
    Top = 3,
}

impl From<BracketLocation> for TrBracket {
    fn from(b: BracketLocation) -> Self {
        match b {
            BracketLocation::None => TrBracket::None,
            BracketLocation::Bottom => TrBracket::Bottom,
            BracketLocation::Middle => TrBracket::Middle,
            BracketLocation::Top => TrBracket::Top,
        }
    }
}

/// One person-year of income in DKK. Spouse fields are read only when
/// `married` is nonzero; `regional_rate` only when `has_regional_rate` is nonzero.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TrIncome {
    pub li: f64,
    pub ci: f64,
    pub d: f64,
    pub married: u8,
    pub spouse_li: f64,
    pub spouse_ci: f64,
    pub spouse_d: f64,
    pub has_regional_rate: u8,
    pub regional_rate: f64,
}

impl TrIncome {
    fn to_record(self) -> Result<IncomeRecord, Error> {
        let mut rec = IncomeRecord::single(self.li, self.ci, self.d);
        if self.married != 0 {
            rec.spouse = Some(SpouseIncome {
                li: self.spouse_li,
                ci: self.spouse_ci,
                d: self.spouse_d,
            });
        }
        if self.has_regional_rate != 0 {
            rec.regional_rate = Some(self.regional_rate);
        }
        rec.validate()?;
        Ok(rec)
    }
}

/// Opaque tax system.
pub struct TrTaxSystem(TaxSystem);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TrStatus {
    match e {
        Error::InvalidRecord(_) => TrStatus::InvalidRecord,
        Error::InvalidSystem(_) => TrStatus::InvalidSystem,
        Error::InvalidFactor(_) => TrStatus::InvalidFactor,
        Error::RateAtOrAboveOne { .. } => TrStatus::RateAtOrAboveOne,
        Error::ZeroContrast(_) => TrStatus::ZeroContrast,
        Error::Degenerate(_) => TrStatus::Degenerate,
        Error::Io { .. } => TrStatus::Io,
        _ => TrStatus::Other,
    }
}

enum Failure {
    Null(&'static str),
    Utf8,
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

/// Runs `f`, translating errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TrStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            TrStatus::NullPointer
        }
        Ok(Err(Failure::Utf8)) => {
            set_last_error("string argument is not valid UTF-8");
            TrStatus::InvalidUtf8
        }
        Ok(Err(Failure::Engine(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            TrStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write<T>(p: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn read_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8)
}

fn boxed(sys: TaxSystem) -> *mut TrTaxSystem {
    Box::into_raw(Box::new(TrTaxSystem(sys)))
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn tr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn tr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Built-in system for year "1986" or "1987".
///
/// # Safety
/// `year` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_system_builtin(
    year: *const c_char,
    out: *mut *mut TrTaxSystem,
) -> TrStatus {
    guard(|| {
        let y = read_str(year, "year")?;
        let sys = TaxSystem::builtin(y)
            .ok_or_else(|| Error::InvalidSystem(format!("no built-in system for '{y}'")))?;
        write(out, boxed(sys), "out")
    })
}

/// System parsed from the TOML parameter format.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_system_from_params(
    text: *const c_char,
    out: *mut *mut TrTaxSystem,
) -> TrStatus {
    guard(|| {
        let sys = TaxSystem::from_param_str(read_str(text, "text")?)?;
        write(out, boxed(sys), "out")
    })
}

/// Copy of `sys` with every DKK amount divided by `factor`.
///
/// # Safety
/// `sys` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_system_deflate(
    sys: *const TrTaxSystem,
    factor: f64,
    out: *mut *mut TrTaxSystem,
) -> TrStatus {
    guard(|| {
        let s = deref(sys, "sys")?;
        write(out, boxed(deflate_system(&s.0, factor)?), "out")
    })
}

/// Releases a system. Null is ignored.
///
/// # Safety
/// `sys` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tr_system_free(sys: *mut TrTaxSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Signature shared by the per-record queries.
unsafe fn query<T>(
    sys: *const TrTaxSystem,
    income: *const TrIncome,
    out: *mut T,
    f: impl FnOnce(&IncomeRecord, &TaxSystem) -> T,
) -> TrStatus {
    guard(|| {
        let s = deref(sys, "sys")?;
        let rec = deref(income, "income")?.to_record()?;
        write(out, f(&rec, &s.0), "out")
    })
}

/// National plus regional tax.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_tax_liability(
    sys: *const TrTaxSystem,
    income: *const TrIncome,
    out: *mut f64,
) -> TrStatus {
    query(sys, income, out, tax_liability)
}

/// Marginal rate on labor income by a 100 DKK finite difference.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_effective_mtr(
    sys: *const TrTaxSystem,
    income: *const TrIncome,
    out: *mut f64,
) -> TrStatus {
    query(sys, income, out, effective_mtr)
}

/// Sum of statutory rates of the brackets in which the filer is liable, capped.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_statutory_mtr(
    sys: *const TrTaxSystem,
    income: *const TrIncome,
    out: *mut f64,
) -> TrStatus {
    query(sys, income, out, statutory_mtr)
}

/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_bracket_location(
    sys: *const TrTaxSystem,
    income: *const TrIncome,
    out: *mut TrBracket,
) -> TrStatus {
    query(sys, income, out, |r, s| bracket_location(r, s).into())
}

/// `log(1 - tau_after) - log(1 - tau_before)` at the given income.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_mechanical_change(
    before: *const TrTaxSystem,
    after: *const TrTaxSystem,
    income: *const TrIncome,
    out: *mut f64,
) -> TrStatus {
    guard(|| {
        let b = deref(before, "before")?;
        let a = deref(after, "after")?;
        let rec = deref(income, "income")?.to_record()?;
        write(out, mechanical_ntr_change(&rec, &b.0, &a.0)?, "out")
    })
}

/// Elasticity and standard error from a TOT coefficient and the mean
/// mechanical changes of the two arms.
///
/// # Safety
/// `epsilon` and `se` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_elasticity(
    beta_tot: f64,
    se_tot: f64,
    delta_treated: f64,
    delta_control: f64,
    epsilon: *mut f64,
    se: *mut f64,
) -> TrStatus {
    guard(|| {
        let e = elasticity(beta_tot, se_tot, delta_treated, delta_control)?;
        write(epsilon, e.epsilon, "epsilon")?;
        write(se, e.se, "se")
    })
}

/// `(mean_a - mean_b) / sqrt((sd_a^2 + sd_b^2) / 2)`; Degenerate when both sds are zero.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_normalized_difference(
    mean_a: f64,
    mean_b: f64,
    sd_a: f64,
    sd_b: f64,
    out: *mut f64,
) -> TrStatus {
    guard(|| {
        let v = normalized_difference(mean_a, mean_b, sd_a, sd_b)
            .ok_or_else(|| Error::Degenerate("both standard deviations are zero".into()))?;
        write(out, v, "out")
    })
}
