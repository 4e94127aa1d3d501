//! C ABI over the nbesov library.
//!
//! Every function returns an [`NbStatus`]; on failure a message is kept per
//! thread and read with [`nb_last_error`]. Basis handles are opaque, made by
//! `nb_basis_interval`, `nb_basis_rectangle` or `nb_basis_load` and released
//! with `nb_basis_free`.
//! Infinite exponents are passed as `INFINITY`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nbesov::domains::io::{load_basis, save_basis};
use nbesov::domains::{build_interval_basis, build_rectangle_basis};
use nbesov::norms::{besov_hom, besov_inhom, BesovParams};
use nbesov::spectral::{heat, GridFunction};
use nbesov::verify::{run_experiment, ExperimentId, ExperimentSpec};
use nbesov::{make_partition, EigenBasis, Error, PartitionVariant};

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Resolution = 3,
    Numerical = 4,
    Io = 5,
    Format = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Partition of unity variants.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbPartition {
    Standard = 0,
    Perturbed = 1,
    Broken = 2,
}

impl From<NbPartition> for PartitionVariant {
    fn from(p: NbPartition) -> Self {
        match p {
            NbPartition::Standard => PartitionVariant::Standard,
            NbPartition::Perturbed => PartitionVariant::Perturbed,
            NbPartition::Broken => PartitionVariant::Broken,
        }
    }
}

/// Opaque eigenbasis handle.
pub struct NbBasis(EigenBasis);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> NbStatus {
    match e {
        Error::InvalidDomain(_)
        | Error::InvalidExponent(_)
        | Error::InvalidParameter(_)
        | Error::GridMismatch { .. }
        | Error::NonFiniteSymbol { .. } => NbStatus::InvalidArgument,
        Error::ModesBeyondResolution(_) | Error::UnresolvedBand(_) | Error::DisconnectedMesh { .. } => {
            NbStatus::Resolution
        }
        Error::Eigensolver(_) | Error::Quadrature { .. } | Error::NoConvergence { .. } => NbStatus::Numerical,
        Error::Io(_) => NbStatus::Io,
        Error::Format(_) | Error::Json(_) => NbStatus::Format,
    }
}

/// Run `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (NbStatus, String)>) -> NbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            NbStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            NbStatus::Panic
        }
    }
}

fn lib(e: Error) -> (NbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NbStatus, String) {
    (NbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn basis_ref<'a>(b: *const NbBasis) -> Result<&'a EigenBasis, (NbStatus, String)> {
    b.as_ref().map(|b| &b.0).ok_or_else(|| null("basis"))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, (NbStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| (NbStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn values_arg<'a>(v: *const f64, len: usize, basis: &EigenBasis) -> Result<&'a [f64], (NbStatus, String)> {
    if v.is_null() {
        return Err(null("values"));
    }
    let n = basis.grid().len();
    if len != n {
        return Err(lib(Error::GridMismatch { expected: n, got: len }));
    }
    Ok(std::slice::from_raw_parts(v, len))
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), (NbStatus, String)> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn nb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Cosine basis of `[0, length]` with `k` modes on `n` cells.
#[no_mangle]
pub extern "C" fn nb_basis_interval(length: f64, k: usize, n: usize, out: *mut *mut NbBasis) -> NbStatus {
    guard(|| store(out, NbBasis(build_interval_basis(length, k, n).map_err(lib)?)))
}

/// Tensor cosine basis of `[0, lx] x [0, ly]` with the `k` lowest modes.
#[no_mangle]
pub extern "C" fn nb_basis_rectangle(lx: f64, ly: f64, k: usize, nx: usize, ny: usize, out: *mut *mut NbBasis) -> NbStatus {
    guard(|| store(out, NbBasis(build_rectangle_basis(lx, ly, k, nx, ny).map_err(lib)?)))
}

/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nb_basis_load(path: *const c_char, out: *mut *mut NbBasis) -> NbStatus {
    guard(|| {
        let p = path_arg(path)?;
        store(out, NbBasis(load_basis(p).map_err(lib)?))
    })
}

/// # Safety
/// `basis` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nb_basis_save(basis: *const NbBasis, path: *const c_char) -> NbStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        save_basis(path_arg(path)?, b).map_err(lib)
    })
}

/// # Safety
/// `basis` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn nb_basis_free(basis: *mut NbBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Number of modes and grid points.
///
/// # Safety
/// `basis` must come from this library; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn nb_basis_size(basis: *const NbBasis, modes: *mut usize, points: *mut usize) -> NbStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        if let Some(m) = modes.as_mut() {
            *m = b.len();
        }
        if let Some(p) = points.as_mut() {
            *p = b.grid().len();
        }
        Ok(())
    })
}

/// Copy the eigenvalues into `out[0..cap]`; fails if `cap` is too small.
///
/// # Safety
/// `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn nb_basis_eigenvalues(basis: *const NbBasis, out: *mut f64, cap: usize) -> NbStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ev = b.eigenvalues();
        if cap < ev.len() {
            return Err((NbStatus::BufferTooSmall, format!("need {} doubles, got {cap}", ev.len())));
        }
        ptr::copy_nonoverlapping(ev.as_ptr(), out, ev.len());
        Ok(())
    })
}

/// `phi_j(l)` for the chosen partition.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nb_phi_j(partition: NbPartition, j: i32, l: f64, out: *mut f64) -> NbStatus {
    guard(|| {
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        *o = make_partition(partition.into()).phi_j(j, l);
        Ok(())
    })
}

/// Besov norm of grid values. With `homogeneous != 0` the homogeneous norm
/// is computed and `tail` receives the size of the blocks below the range.
///
/// # Safety
/// `values` must hold `len` doubles, one per grid point; `value` must be
/// valid; `tail` may be null.
#[no_mangle]
pub unsafe extern "C" fn nb_besov_norm(
    basis: *const NbBasis,
    values: *const f64,
    len: usize,
    s: f64,
    p: f64,
    q: f64,
    homogeneous: i32,
    partition: NbPartition,
    value: *mut f64,
    tail: *mut f64,
) -> NbStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        let v = values_arg(values, len, b)?;
        let out = value.as_mut().ok_or_else(|| null("value"))?;
        let f = GridFunction::new(b.grid_arc().clone(), v.to_vec()).map_err(lib)?;
        let params = BesovParams::for_basis(b, s, p, q);
        let pou = make_partition(partition.into());
        let (x, t) = if homogeneous != 0 {
            let h = besov_hom(&f, &params, &pou, b).map_err(lib)?;
            (h.value, h.tail_bound)
        } else {
            (besov_inhom(&f, &params, &pou, b).map_err(lib)?, 0.0)
        };
        *out = x;
        if let Some(tp) = tail.as_mut() {
            *tp = t;
        }
        Ok(())
    })
}

/// `out = e^(-tH) values`.
///
/// # Safety
/// `values` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nb_heat(basis: *const NbBasis, t: f64, values: *const f64, len: usize, out: *mut f64) -> NbStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        let v = values_arg(values, len, b)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let f = GridFunction::new(b.grid_arc().clone(), v.to_vec()).map_err(lib)?;
        let g = heat(t, &f, b).map_err(lib)?;
        ptr::copy_nonoverlapping(g.values().as_ptr(), out, len);
        Ok(())
    })
}

/// Run one experiment by id (`exp_partition`, ...). `verdict` receives the
/// CLI exit code of the verdict (0 pass, 2 inconclusive, 3 fail); `json`,
/// if not null, receives the report, to be released with
/// [`nb_string_free`].
///
/// # Safety
/// `id` must be NUL-terminated; `verdict` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nb_run_experiment(
    id: *const c_char,
    seed: u64,
    negative_control: i32,
    verdict: *mut i32,
    json: *mut *mut c_char,
) -> NbStatus {
    guard(|| {
        let name = path_arg(id)?;
        let out = verdict.as_mut().ok_or_else(|| null("verdict"))?;
        let id: ExperimentId = name.parse().map_err(lib)?;
        let mut spec = ExperimentSpec::new(id);
        spec.seed = seed;
        spec.negative_control = negative_control != 0;
        let r = run_experiment(&spec).map_err(lib)?;
        *out = r.verdict.exit_code();
        if !json.is_null() {
            *json = CString::new(r.to_json()).map_err(|e| (NbStatus::Format, e.to_string()))?.into_raw();
        }
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
