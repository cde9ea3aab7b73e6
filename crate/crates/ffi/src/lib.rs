//! C interface to `heom-dpt`.
//!
//! Objects are opaque handles created by `hd_*_new`/`hd_*_assemble`-style
//! constructors and released with the matching `hd_*_free`. Every fallible call
//! returns an [`HdStatus`]; on failure `hd_last_error` describes the cause until
//! the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use heom_dpt::heom::{assemble, HeomLiouvillian};
use heom_dpt::model::{self, ModelInstance};
use heom_dpt::spectra::{self, PhysicalState, SolverOptions};
use heom_dpt::symmetry::decompose;
use heom_dpt::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Budget = 4,
    NoConvergence = 5,
    Numerical = 6,
    Symmetry = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

pub struct HdModel {
    inner: ModelInstance,
}

pub struct HdLiouvillian {
    inner: HeomLiouvillian,
}

pub struct HdState {
    inner: PhysicalState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HdStatus {
    match e {
        Error::Dimension(_) => HdStatus::Dimension,
        Error::Size(_) | Error::Budget(_) => HdStatus::Budget,
        Error::InvalidArgument(_) | Error::Config { .. } | Error::EmbeddingUnsupported(_) | Error::InvalidState(_) => {
            HdStatus::InvalidArgument
        }
        Error::NoConvergence(_) | Error::Stiff { .. } => HdStatus::NoConvergence,
        Error::SymmetryViolation { .. } | Error::MissingSector(_) => HdStatus::Symmetry,
        Error::Io(_) => HdStatus::Io,
        _ => HdStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (HdStatus, String)>) -> HdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HdStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {message}"));
            HdStatus::Panic
        }
    }
}

fn lift<T>(r: heom_dpt::Result<T>) -> Result<T, (HdStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (HdStatus, String) {
    (HdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, (HdStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), (HdStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn hd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Dissipative LMG model with collective spin `n/2`.
///
/// # Safety
/// `out` must be a valid pointer; the handle written there is owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn hd_model_lmg(n: usize, v: f64, gamma: f64, kappa: f64, omega: f64, out: *mut *mut HdModel) -> HdStatus {
    guard(|| emit(out, HdModel { inner: lift(model::lmg(n, v, gamma, kappa, omega))? }))
}

/// LMG model with a transverse field `h` and Z2 parity symmetry.
///
/// # Safety
/// As for [`hd_model_lmg`].
#[no_mangle]
pub unsafe extern "C" fn hd_model_z2_lmg(
    n: usize,
    v: f64,
    gamma: f64,
    kappa: f64,
    omega: f64,
    h: f64,
    out: *mut *mut HdModel,
) -> HdStatus {
    guard(|| emit(out, HdModel { inner: lift(model::z2_lmg(n, v, gamma, kappa, omega, h))? }))
}

/// Two-mode Dicke model with `n` spins.
///
/// # Safety
/// As for [`hd_model_lmg`].
#[no_mangle]
pub unsafe extern "C" fn hd_model_two_mode_dicke(
    n: usize,
    g: f64,
    omega0: f64,
    omega: f64,
    kappa: f64,
    out: *mut *mut HdModel,
) -> HdStatus {
    guard(|| emit(out, HdModel { inner: lift(model::two_mode_dicke(n, g, omega0, omega, kappa))? }))
}

/// Qubit coupled to one damped mode with complex amplitude `g_re + i g_im`.
///
/// # Safety
/// As for [`hd_model_lmg`].
#[no_mangle]
pub unsafe extern "C" fn hd_model_qubit_decay(
    omega_q: f64,
    g_re: f64,
    g_im: f64,
    omega: f64,
    kappa: f64,
    out: *mut *mut HdModel,
) -> HdStatus {
    guard(|| emit(out, HdModel { inner: lift(model::qubit_decay(omega_q, Complex64::new(g_re, g_im), omega, kappa))? }))
}

/// System Hilbert-space dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hd_model_system_dim(model: *const HdModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.system_dim())
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_model_free(model: *mut HdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds the generator truncated at total depth `k_max`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hd_liouvillian_assemble(model: *const HdModel, k_max: usize, out: *mut *mut HdLiouvillian) -> HdStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        emit(out, HdLiouvillian { inner: lift(assemble(&m.inner, k_max))? })
    })
}

/// Dimension of the generator, or 0 for a null handle.
///
/// # Safety
/// `l` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hd_liouvillian_dim(l: *const HdLiouvillian) -> usize {
    l.as_ref().map_or(0, |l| l.inner.dim())
}

/// # Safety
/// `l` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_liouvillian_free(l: *mut HdLiouvillian) {
    if !l.is_null() {
        drop(Box::from_raw(l));
    }
}

/// Spectral gap `λ₁` of the full generator, using the default solver settings.
///
/// # Safety
/// `l` must be a live handle; `re` and `im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hd_gap(l: *const HdLiouvillian, re: *mut f64, im: *mut f64) -> HdStatus {
    guard(|| {
        let l = borrow(l, "liouvillian")?;
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let g = lift(spectra::gap(&l.inner, &SolverOptions::default()))?;
        *re = g.re;
        *im = g.im;
        Ok(())
    })
}

/// Physical steady state. Uses the charge-zero sector when the model carries a
/// symmetry.
///
/// # Safety
/// `l` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hd_steady_state(l: *const HdLiouvillian, out: *mut *mut HdState) -> HdStatus {
    guard(|| {
        let l = borrow(l, "liouvillian")?;
        let opts = SolverOptions::default();
        let (phys, _) = match &l.inner.model().symmetry {
            Some(spec) => lift(decompose(&l.inner, spec).and_then(|d| spectra::steady_state_sector(&d, &opts)))?,
            None => lift(spectra::steady_state(&l.inner, &opts))?,
        };
        emit(out, HdState { inner: phys })
    })
}

/// Dimension `d` of the `d × d` density matrix, or 0 for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hd_state_dim(state: *const HdState) -> usize {
    state.as_ref().map_or(0, |s| s.inner.dim())
}

/// Copies the density matrix row-major as interleaved `(re, im)` pairs into
/// `buf`, which must hold `len >= 2 d²` doubles.
///
/// # Safety
/// `state` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hd_state_matrix(state: *const HdState, buf: *mut f64, len: usize) -> HdStatus {
    guard(|| {
        let s = borrow(state, "state")?;
        let data = s.inner.matrix.as_slice();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < 2 * data.len() {
            return Err((HdStatus::BufferTooSmall, format!("need {} doubles, got {len}", 2 * data.len())));
        }
        let out = std::slice::from_raw_parts_mut(buf, 2 * data.len());
        for (pair, z) in out.chunks_exact_mut(2).zip(data) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(())
    })
}

/// `Tr(ρ O)` for a named operator of the model: `I`, `Sx`, `Sy`, `Sz`, `Sp`, `Sm`.
///
/// # Safety
/// `state` and `model` must be live handles, `name` a NUL-terminated string,
/// `re` and `im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hd_state_expectation(
    state: *const HdState,
    model: *const HdModel,
    name: *const c_char,
    re: *mut f64,
    im: *mut f64,
) -> HdStatus {
    guard(|| {
        let s = borrow(state, "state")?;
        let m = borrow(model, "model")?;
        if name.is_null() {
            return Err(null("name"));
        }
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| (HdStatus::InvalidArgument, "name is not UTF-8".to_string()))?;
        let o = lift(m.inner.named_operator(name))?;
        let z = lift(spectra::expectation(&s.inner, &o))?;
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_state_free(state: *mut HdState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}
