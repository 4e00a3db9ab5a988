//! C ABI for the fslab core: opaque handles, integer status codes, and a
//! thread-local last-error message.
//!
//! Conventions:
//! - every fallible call returns [`FslabStatus`]; outputs go through `out`
//!   pointers which are written only on `Ok`;
//! - handles are created and released by this library only
//!   (`fslab_*_free`); passing foreign or freed pointers is undefined
//!   behavior;
//! - `fslab_last_error()` describes the most recent failure on the calling
//!   thread, valid until the next failing call.
//!
//! The corresponding header is `include/fslab.h`, kept in sync with
//! `cbindgen.toml` (regenerate with `cbindgen --config cbindgen.toml`).

use std::cell::RefCell;
use std::ffi::CString;

use libc::{c_char, size_t};

use fslab::content::{dyadic_content, max_frostman, Tau};
use fslab::experiment::dimension_estimate;
use fslab::grid::{GridSet1D, GridSet2D, Level};
use fslab::measure::{DeltaMeasure, Direction};
use fslab::projection::{
    affine_sumset, high_multiplicity_set, project_set, RadiusBound, ScaleWindow,
};
use fslab::regularity::{gen_ap_family, gen_random_cantor, gen_self_similar};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FslabStatus {
    Ok = 0,
    InvalidArgument = 1,
    OutOfBounds = 2,
    EmptyInput = 3,
    NullPointer = 4,
    InternalError = 5,
}

/// Opaque 1D grid set handle.
pub struct FslabSet {
    inner: GridSet1D,
}

/// Opaque measure handle.
pub struct FslabMeasure {
    inner: DeltaMeasure,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &fslab::Error) -> FslabStatus {
    use fslab::Error::*;
    match err {
        LevelTooFine { .. } | CannotRefine { .. } | LevelMismatch { .. }
        | InvalidParameter { .. } | NotProbability { .. } => FslabStatus::InvalidArgument,
        OutOfBounds { .. } => FslabStatus::OutOfBounds,
        EmptyInput { .. } | NullRestriction | PointNotInSet => FslabStatus::EmptyInput,
        _ => FslabStatus::InternalError,
    }
}

fn fail(err: fslab::Error) -> FslabStatus {
    let code = status_of(&err);
    set_error(&err.to_string());
    code
}

macro_rules! nonnull {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => {
                set_error("null pointer argument");
                return FslabStatus::NullPointer;
            }
        }
    };
}

macro_rules! out_ptr {
    ($ptr:expr) => {
        match unsafe { $ptr.as_mut() } {
            Some(r) => r,
            None => {
                set_error("null output pointer");
                return FslabStatus::NullPointer;
            }
        }
    };
}

/// Message describing the last failure on this thread.  Valid until the
/// next failing call from the same thread.
#[no_mangle]
pub extern "C" fn fslab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fslab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Override the maximum grid level for this process.
#[no_mangle]
pub extern "C" fn fslab_set_max_level(level: u32) {
    fslab::grid::set_max_level(level);
}

/// # Safety
/// `set` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fslab_set_free(set: *mut FslabSet) {
    if !set.is_null() {
        drop(unsafe { Box::from_raw(set) });
    }
}

/// # Safety
/// `measure` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fslab_measure_free(measure: *mut FslabMeasure) {
    if !measure.is_null() {
        drop(unsafe { Box::from_raw(measure) });
    }
}

/// Iterated arithmetic-progression Cantor set.
///
/// # Safety
/// `out` must be a valid pointer; on `Ok` it receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn fslab_set_self_similar(
    branches: u64,
    gap: u64,
    contraction: u32,
    depth: u32,
    offset: u64,
    out: *mut *mut FslabSet,
) -> FslabStatus {
    let out = out_ptr!(out);
    match gen_self_similar(branches, gap, contraction, depth, offset) {
        Ok((set, _)) => {
            *out = Box::into_raw(Box::new(FslabSet { inner: set }));
            FslabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Dyadic percolation set (deterministic per seed).
///
/// # Safety
/// `out` must be a valid pointer; on `Ok` it receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn fslab_set_percolation(
    level: u32,
    survival: f64,
    seed: u64,
    out: *mut *mut FslabSet,
) -> FslabStatus {
    let out = out_ptr!(out);
    let level = match Level::new(level) {
        Ok(l) => l,
        Err(e) => return fail(e),
    };
    match gen_random_cantor(level, survival, seed) {
        Ok(set) => {
            *out = Box::into_raw(Box::new(FslabSet { inner: set }));
            FslabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// The arithmetic-progression pair (A, E) at level `log2(n^2)`.
///
/// # Safety
/// `out_a` and `out_e` must be valid pointers; on `Ok` both receive new
/// handles.
#[no_mangle]
pub unsafe extern "C" fn fslab_set_ap_family(
    n: u64,
    kappa_num: u32,
    kappa_den: u32,
    out_a: *mut *mut FslabSet,
    out_e: *mut *mut FslabSet,
) -> FslabStatus {
    let out_a = out_ptr!(out_a);
    let out_e = out_ptr!(out_e);
    match gen_ap_family(n, kappa_num, kappa_den) {
        Ok((a, e)) => {
            *out_a = Box::into_raw(Box::new(FslabSet { inner: a }));
            *out_e = Box::into_raw(Box::new(FslabSet { inner: e }));
            FslabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Number of cells.
///
/// # Safety
/// `set` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fslab_set_len(set: *const FslabSet) -> size_t {
    match unsafe { set.as_ref() } {
        Some(s) => s.inner.len(),
        None => 0,
    }
}

/// Grid level of the set.
///
/// # Safety
/// `set` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fslab_set_level(set: *const FslabSet) -> u32 {
    match unsafe { set.as_ref() } {
        Some(s) => s.inner.level().0,
        None => 0,
    }
}

/// Copy up to `cap` cell indices into `buf`; returns the total count.
///
/// # Safety
/// `set` must be live; `buf` must point to at least `cap` writable `i64`.
#[no_mangle]
pub unsafe extern "C" fn fslab_set_cells(
    set: *const FslabSet,
    buf: *mut i64,
    cap: size_t,
) -> size_t {
    let Some(s) = (unsafe { set.as_ref() }) else { return 0 };
    let cells = s.inner.cells();
    if !buf.is_null() {
        let n = cells.len().min(cap);
        unsafe { std::ptr::copy_nonoverlapping(cells.as_ptr(), buf, n) };
    }
    cells.len()
}

/// Number of level-`target` cells meeting the set.
///
/// # Safety
/// `set` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fslab_set_covering_number(
    set: *const FslabSet,
    target_level: u32,
    out: *mut u64,
) -> FslabStatus {
    let s = nonnull!(set);
    let out = out_ptr!(out);
    let target = match Level::new(target_level) {
        Ok(l) => l,
        Err(e) => return fail(e),
    };
    match s.inner.covering_number(target) {
        Ok(n) => {
            *out = n as u64;
            FslabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Resolution-limited dyadic Hausdorff content at `tau = tau_num/tau_den`
/// and the maximal Frostman mass; by tree duality the two agree.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fslab_content_duality(
    set: *const FslabSet,
    tau_num: u32,
    tau_den: u32,
    out_content: *mut f64,
    out_frostman_mass: *mut f64,
) -> FslabStatus {
    let s = nonnull!(set);
    let out_c = out_ptr!(out_content);
    let out_m = out_ptr!(out_frostman_mass);
    let tau = match Tau::rational(tau_num, tau_den) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let content = match dyadic_content(&s.inner, tau) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let mass = if s.inner.is_empty() {
        0.0
    } else {
        match max_frostman(&s.inner, tau) {
            Ok(f) => f.mass.to_f64(),
            Err(e) => return fail(e),
        }
    };
    *out_c = content.value_f64();
    *out_m = mass;
    FslabStatus::Ok
}

/// Least-squares slope of `log2 N(set, level)` over `levels`.
///
/// # Safety
/// `levels` must point to `n_levels` readable `u32`; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn fslab_dimension_estimate(
    set: *const FslabSet,
    levels: *const u32,
    n_levels: size_t,
    out_slope: *mut f64,
) -> FslabStatus {
    let s = nonnull!(set);
    let out = out_ptr!(out_slope);
    if levels.is_null() {
        set_error("null levels pointer");
        return FslabStatus::NullPointer;
    }
    let raw = unsafe { std::slice::from_raw_parts(levels, n_levels) };
    let mut ladder = Vec::with_capacity(raw.len());
    for &l in raw {
        match Level::new(l) {
            Ok(l) => ladder.push(l),
            Err(e) => return fail(e),
        }
    }
    match dimension_estimate(&s.inner, &ladder) {
        Ok(slope) => {
            *out = slope;
            FslabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Covering number of the union over `c` in `E` of `A + c B` at the target
/// level (all read as point sets).
///
/// # Safety
/// All pointers must be valid handles.
#[no_mangle]
pub unsafe extern "C" fn fslab_sumset_covering_number(
    a: *const FslabSet,
    e: *const FslabSet,
    b: *const FslabSet,
    target_level: u32,
    out: *mut u64,
) -> FslabStatus {
    let a = nonnull!(a);
    let e = nonnull!(e);
    let b = nonnull!(b);
    let out = out_ptr!(out);
    let target = match Level::new(target_level) {
        Ok(l) => l,
        Err(err) => return fail(err),
    };
    match affine_sumset(&a.inner, &e.inner, &b.inner, target) {
        Ok(s) => {
            *out = s.len() as u64;
            FslabStatus::Ok
        }
        Err(err) => fail(err),
    }
}

/// Covering number of `pi_theta(A x B)` at the target level, for the
/// dyadic direction `theta = theta_num / 2^theta_qlevel`.
///
/// # Safety
/// All pointers must be valid handles.
#[no_mangle]
pub unsafe extern "C" fn fslab_projection_covering_number(
    a: *const FslabSet,
    b: *const FslabSet,
    theta_num: i64,
    theta_qlevel: u32,
    target_level: u32,
    out: *mut u64,
) -> FslabStatus {
    let a = nonnull!(a);
    let b = nonnull!(b);
    let out = out_ptr!(out);
    let theta = match Direction::new(theta_num, theta_qlevel) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let target = match Level::new(target_level) {
        Ok(l) => l,
        Err(e) => return fail(e),
    };
    let k = match GridSet2D::product(a.inner.clone(), b.inner.clone()) {
        Ok(k) => k,
        Err(e) => return fail(e),
    };
    match project_set(&k, theta, target) {
        Ok(p) => {
            *out = p.len() as u64;
            FslabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Number of cells of `A x B` whose fiber multiplicity for the window
/// `[2^-r_level, 2^-cap_exp]` reaches `threshold` (`cap_is_infinite`
/// ignores `cap_exp` and uses an unbounded ball).
///
/// # Safety
/// All pointers must be valid handles.
#[no_mangle]
pub unsafe extern "C" fn fslab_high_multiplicity_count(
    a: *const FslabSet,
    b: *const FslabSet,
    theta_num: i64,
    theta_qlevel: u32,
    threshold: f64,
    r_level: u32,
    cap_exp: i32,
    cap_is_infinite: bool,
    out: *mut u64,
) -> FslabStatus {
    let a = nonnull!(a);
    let b = nonnull!(b);
    let out = out_ptr!(out);
    let theta = match Direction::new(theta_num, theta_qlevel) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let r = match Level::new(r_level) {
        Ok(l) => l,
        Err(e) => return fail(e),
    };
    let cap = if cap_is_infinite { RadiusBound::Infinity } else { RadiusBound::Exp(cap_exp) };
    let window = match ScaleWindow::new(r, cap) {
        Ok(w) => w,
        Err(e) => return fail(e),
    };
    let k = match GridSet2D::product(a.inner.clone(), b.inner.clone()) {
        Ok(k) => k,
        Err(e) => return fail(e),
    };
    match high_multiplicity_set(&k, theta, threshold, window) {
        Ok(h) => {
            *out = h.len() as u64;
            FslabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Uniform probability measure on the cells of a set.
///
/// # Safety
/// `set` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fslab_measure_uniform(
    set: *const FslabSet,
    out: *mut *mut FslabMeasure,
) -> FslabStatus {
    let s = nonnull!(set);
    let out = out_ptr!(out);
    match DeltaMeasure::uniform(&s.inner) {
        Ok(m) => {
            *out = Box::into_raw(Box::new(FslabMeasure { inner: m }));
            FslabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Maximal Frostman measure of a set at `tau`, normalised to probability.
///
/// # Safety
/// `set` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fslab_measure_frostman(
    set: *const FslabSet,
    tau_num: u32,
    tau_den: u32,
    out: *mut *mut FslabMeasure,
) -> FslabStatus {
    let s = nonnull!(set);
    let out = out_ptr!(out);
    let tau = match Tau::rational(tau_num, tau_den) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let f = match max_frostman(&s.inner, tau) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    match f.measure.restrict_normalize(&f.measure.support()) {
        Ok(m) => {
            *out = Box::into_raw(Box::new(FslabMeasure { inner: m }));
            FslabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Shannon entropy (bits) of a probability measure at the target dyadic
/// partition.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fslab_measure_entropy(
    measure: *const FslabMeasure,
    target_level: u32,
    out: *mut f64,
) -> FslabStatus {
    let m = nonnull!(measure);
    let out = out_ptr!(out);
    let target = match Level::new(target_level) {
        Ok(l) => l,
        Err(e) => return fail(e),
    };
    match m.inner.entropy(target) {
        Ok(h) => {
            *out = h;
            FslabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Discrete L2 norm of a measure.
///
/// # Safety
/// `measure` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fslab_measure_l2_norm(
    measure: *const FslabMeasure,
    out: *mut f64,
) -> FslabStatus {
    let m = nonnull!(measure);
    let out = out_ptr!(out);
    *out = m.inner.l2_norm();
    FslabStatus::Ok
}

/// Convolution of two measures on the same grid.
///
/// # Safety
/// Pointers must be valid handles.
#[no_mangle]
pub unsafe extern "C" fn fslab_measure_convolve(
    a: *const FslabMeasure,
    b: *const FslabMeasure,
    out: *mut *mut FslabMeasure,
) -> FslabStatus {
    let a = nonnull!(a);
    let b = nonnull!(b);
    let out = out_ptr!(out);
    match a.inner.convolve(&b.inner) {
        Ok(c) => {
            *out = Box::into_raw(Box::new(FslabMeasure { inner: c }));
            FslabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Total mass of a measure.
///
/// # Safety
/// `measure` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fslab_measure_total_mass(
    measure: *const FslabMeasure,
    out: *mut f64,
) -> FslabStatus {
    let m = nonnull!(measure);
    let out = out_ptr!(out);
    *out = m.inner.total_mass();
    FslabStatus::Ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn self_similar_roundtrip() {
        let mut set: *mut FslabSet = ptr::null_mut();
        let st = unsafe { fslab_set_self_similar(4, 4, 4, 3, 0, &mut set) };
        assert_eq!(st, FslabStatus::Ok);
        assert_eq!(unsafe { fslab_set_len(set) }, 64);
        assert_eq!(unsafe { fslab_set_level(set) }, 12);
        let mut n = 0u64;
        assert_eq!(unsafe { fslab_set_covering_number(set, 4, &mut n) }, FslabStatus::Ok);
        assert_eq!(n, 4);
        let mut buf = vec![0i64; 4];
        let total = unsafe { fslab_set_cells(set, buf.as_mut_ptr(), 4) };
        assert_eq!(total, 64);
        assert_eq!(buf[0], 0);
        unsafe { fslab_set_free(set) };
    }

    #[test]
    fn invalid_arguments_set_error_message() {
        let mut set: *mut FslabSet = ptr::null_mut();
        let st = unsafe { fslab_set_self_similar(5, 4, 4, 2, 0, &mut set) };
        assert_eq!(st, FslabStatus::InvalidArgument);
        let msg = unsafe { std::ffi::CStr::from_ptr(fslab_last_error()) };
        assert!(msg.to_string_lossy().contains("branches"));
        assert!(set.is_null());
    }

    #[test]
    fn null_pointers_are_rejected() {
        let st = unsafe { fslab_set_self_similar(2, 1, 1, 2, 0, ptr::null_mut()) };
        assert_eq!(st, FslabStatus::NullPointer);
        let mut out = 0u64;
        let st = unsafe { fslab_set_covering_number(ptr::null(), 3, &mut out) };
        assert_eq!(st, FslabStatus::NullPointer);
    }

    #[test]
    fn content_duality_through_ffi() {
        let mut set: *mut FslabSet = ptr::null_mut();
        assert_eq!(
            unsafe { fslab_set_percolation(12, 0.7, 42, &mut set) },
            FslabStatus::Ok
        );
        let (mut c, mut m) = (0.0f64, 0.0f64);
        assert_eq!(
            unsafe { fslab_content_duality(set, 1, 2, &mut c, &mut m) },
            FslabStatus::Ok
        );
        assert!((c - m).abs() < 1e-10);
        assert!(c > 0.0 && c <= 1.0 + 1e-12);
        unsafe { fslab_set_free(set) };
    }

    #[test]
    fn sumset_and_projection_counts() {
        let mut a: *mut FslabSet = ptr::null_mut();
        let mut e: *mut FslabSet = ptr::null_mut();
        assert_eq!(unsafe { fslab_set_ap_family(16, 1, 4, &mut a, &mut e) }, FslabStatus::Ok);
        let mut n = 0u64;
        assert_eq!(
            unsafe { fslab_sumset_covering_number(a, e, a, 8, &mut n) },
            FslabStatus::Ok
        );
        assert!(n <= 128, "sumset count {n}");
        let mut p = 0u64;
        assert_eq!(
            unsafe { fslab_projection_covering_number(a, a, 64, 8, 8, &mut p) },
            FslabStatus::Ok
        );
        assert!(p >= 16);
        unsafe {
            fslab_set_free(a);
            fslab_set_free(e);
        }
    }

    #[test]
    fn measures_through_ffi() {
        let mut set: *mut FslabSet = ptr::null_mut();
        assert_eq!(unsafe { fslab_set_self_similar(2, 2, 2, 4, 0, &mut set) }, FslabStatus::Ok);
        let mut mu: *mut FslabMeasure = ptr::null_mut();
        assert_eq!(unsafe { fslab_measure_uniform(set, &mut mu) }, FslabStatus::Ok);
        let mut h = 0.0f64;
        assert_eq!(unsafe { fslab_measure_entropy(mu, 8, &mut h) }, FslabStatus::Ok);
        assert!((h - 4.0).abs() < 1e-12); // uniform on 2^4 cells
        let mut l2 = 0.0f64;
        assert_eq!(unsafe { fslab_measure_l2_norm(mu, &mut l2) }, FslabStatus::Ok);
        assert!((l2 - 0.25).abs() < 1e-12);
        let mut conv: *mut FslabMeasure = ptr::null_mut();
        assert_eq!(unsafe { fslab_measure_convolve(mu, mu, &mut conv) }, FslabStatus::Ok);
        let mut mass = 0.0f64;
        assert_eq!(unsafe { fslab_measure_total_mass(conv, &mut mass) }, FslabStatus::Ok);
        assert!((mass - 1.0).abs() < 1e-12);
        let mut l2c = 0.0f64;
        assert_eq!(unsafe { fslab_measure_l2_norm(conv, &mut l2c) }, FslabStatus::Ok);
        assert!(l2c <= l2 + 1e-12);
        unsafe {
            fslab_measure_free(conv);
            fslab_measure_free(mu);
            fslab_set_free(set);
        }
    }

    #[test]
    fn high_multiplicity_ceiling_through_ffi() {
        let mut set: *mut FslabSet = ptr::null_mut();
        assert_eq!(unsafe { fslab_set_percolation(8, 0.8, 3, &mut set) }, FslabStatus::Ok);
        let mut n = u64::MAX;
        let st = unsafe {
            fslab_high_multiplicity_count(set, set, 3, 3, 10.0 * 256.0 + 1.0, 8, 0, false, &mut n)
        };
        assert_eq!(st, FslabStatus::Ok);
        assert_eq!(n, 0, "threshold above the universal ceiling");
        unsafe { fslab_set_free(set) };
    }

    #[test]
    fn dimension_estimate_through_ffi() {
        let mut set: *mut FslabSet = ptr::null_mut();
        assert_eq!(unsafe { fslab_set_self_similar(4, 4, 4, 4, 0, &mut set) }, FslabStatus::Ok);
        let levels: Vec<u32> = (0..=4).map(|s| 4 * s).collect();
        let mut slope = 0.0f64;
        assert_eq!(
            unsafe { fslab_dimension_estimate(set, levels.as_ptr(), levels.len(), &mut slope) },
            FslabStatus::Ok
        );
        assert!((slope - 0.5).abs() < 1e-9);
        unsafe { fslab_set_free(set) };
    }

    #[test]
    fn header_lists_every_export() {
        let header = include_str!("../include/fslab.h");
        let src = include_str!("lib.rs");
        let mut missing = Vec::new();
        for line in src.lines() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("pub unsafe extern \"C\" fn ")
                .or_else(|| line.strip_prefix("pub extern \"C\" fn "))
            {
                let name = rest.split('(').next().unwrap().trim();
                if !header.contains(name) {
                    missing.push(name.to_string());
                }
            }
        }
        assert!(missing.is_empty(), "header missing symbols: {missing:?}");
    }
}
