//! C ABI over the `extvar` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`
//! functions and released by the matching `*_free`. Every fallible call
//! returns an [`ExtvarStatus`]; the message of the last failure on the
//! calling thread is available from [`extvar_last_error`].
//!
//! The header `include/extvar.h` is generated by cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use extvar::{
    datagen::Sampler, optimizer, quantizer, theory, Configuration, Error, Kernel, Lattice,
    NeighborhoodFunction, SampleSet,
};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtvarStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Input failed validation (shapes, ranges, kernel rules, hypotheses).
    InvalidInput = 2,
    /// The computation failed (e.g. infeasible separation).
    Runtime = 3,
    /// A Rust panic was caught at the boundary.
    Panic = 4,
}

/// Kernel families for [`extvar_model_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtvarKernelKind {
    Kronecker = 0,
    /// `param` is sigma.
    Gaussian = 1,
    /// `param` is the integer radius.
    Rectangular = 2,
}

/// Initialization strategy for [`ExtvarFitParams`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtvarInit {
    Subsample = 0,
    PlusPlus = 1,
}

/// Plain-data fit parameters; `extvar_fit_params_default` fills defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ExtvarFitParams {
    pub restarts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub delta: f64,
    pub init: ExtvarInit,
    pub seed: u64,
}

/// Lattice plus resolved neighborhood function.
pub struct ExtvarModel {
    lattice: Lattice,
    lambda: NeighborhoodFunction,
}

pub struct ExtvarSamples(SampleSet);

pub struct ExtvarConfig(Configuration);

pub struct ExtvarFitResult(optimizer::FitResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> ExtvarStatus {
    if err.is_validation() {
        ExtvarStatus::InvalidInput
    } else {
        ExtvarStatus::Runtime
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard<F>(f: F) -> ExtvarStatus
where
    F: FnOnce() -> Result<(), ExtvarStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ExtvarStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("panic inside extvar".into());
            ExtvarStatus::Panic
        }
    }
}

fn lift<T>(r: extvar::Result<T>) -> Result<T, ExtvarStatus> {
    r.map_err(|e| {
        let status = status_of(&e);
        set_error(e.to_string());
        status
    })
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), ExtvarStatus> {
    if p.is_null() {
        set_error(format!("`{name}` is null"));
        Err(ExtvarStatus::NullPointer)
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn view<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], ExtvarStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts(p, len))
}

fn checked_len(a: usize, b: usize) -> Result<usize, ExtvarStatus> {
    a.checked_mul(b).ok_or_else(|| {
        set_error("length overflow".into());
        ExtvarStatus::InvalidInput
    })
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn extvar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Build a lattice with `rank` axes of lengths `dims` and a kernel.
///
/// # Safety
/// `dims` must point to `rank` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn extvar_model_new(
    dims: *const usize,
    rank: usize,
    kind: ExtvarKernelKind,
    param: f64,
    out: *mut *mut ExtvarModel,
) -> ExtvarStatus {
    guard(|| {
        non_null(out, "out")?;
        let dims = view(dims, rank, "dims")?;
        let lattice = lift(Lattice::new(dims))?;
        let kernel = match kind {
            ExtvarKernelKind::Kronecker => Kernel::Kronecker,
            ExtvarKernelKind::Gaussian => Kernel::Gaussian { sigma: param },
            ExtvarKernelKind::Rectangular => {
                if !(param >= 0.0 && param.fract() == 0.0) {
                    set_error(format!("rectangular radius must be a nonnegative integer, got {param}"));
                    return Err(ExtvarStatus::InvalidInput);
                }
                Kernel::Rectangular { radius: param as u64 }
            }
        };
        let lambda = lift(NeighborhoodFunction::new(&lattice, kernel))?;
        *out = Box::into_raw(Box::new(ExtvarModel { lattice, lambda }));
        Ok(())
    })
}

/// Build a lattice with an explicit kernel table: `count` offsets of
/// `rank` integers each (row-major in `offsets`) with their `values`.
///
/// # Safety
/// `dims` must hold `rank` values, `offsets` `count * rank`, `values` `count`.
#[no_mangle]
pub unsafe extern "C" fn extvar_model_new_table(
    dims: *const usize,
    rank: usize,
    offsets: *const i64,
    values: *const f64,
    count: usize,
    out: *mut *mut ExtvarModel,
) -> ExtvarStatus {
    guard(|| {
        non_null(out, "out")?;
        let dims = view(dims, rank, "dims")?;
        let offsets = view(offsets, checked_len(count, rank)?, "offsets")?;
        let values = view(values, count, "values")?;
        let lattice = lift(Lattice::new(dims))?;
        let mut table = std::collections::BTreeMap::new();
        for (k, &v) in offsets.chunks_exact(rank.max(1)).zip(values) {
            if table.insert(k.to_vec(), v).is_some() {
                set_error(format!("offset {k:?} given twice"));
                return Err(ExtvarStatus::InvalidInput);
            }
        }
        let lambda = lift(NeighborhoodFunction::new(&lattice, Kernel::Table(table)))?;
        *out = Box::into_raw(Box::new(ExtvarModel { lattice, lambda }));
        Ok(())
    })
}

/// Number of lattice points `|I|`.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn extvar_model_size(model: *const ExtvarModel) -> usize {
    model.as_ref().map_or(0, |m| m.lattice.len())
}

/// `Λ(k)` for an offset of `rank` integers.
///
/// # Safety
/// `model` must be live, `offset` must hold `rank` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn extvar_model_neighborhood(
    model: *const ExtvarModel,
    offset: *const i64,
    rank: usize,
    out: *mut f64,
) -> ExtvarStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let k = view(offset, rank, "offset")?;
        *out = lift((*model).lambda.value(k))?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from `extvar_model_new*` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn extvar_model_free(model: *mut ExtvarModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Copy `n × d` row-major observations into a sample handle.
///
/// # Safety
/// `data` must hold `n * d` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn extvar_samples_new(
    data: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut ExtvarSamples,
) -> ExtvarStatus {
    guard(|| {
        non_null(out, "out")?;
        let data = view(data, checked_len(n, d)?, "data")?;
        let s = lift(SampleSet::new(d, data.to_vec()))?;
        *out = Box::into_raw(Box::new(ExtvarSamples(s)));
        Ok(())
    })
}

/// # Safety
/// `samples` must come from `extvar_samples_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn extvar_samples_free(samples: *mut ExtvarSamples) {
    if !samples.is_null() {
        drop(Box::from_raw(samples));
    }
}

/// Copy `k × d` row-major centroid coordinates (flat lattice order).
///
/// # Safety
/// `coords` must hold `k * d` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn extvar_config_new(
    coords: *const f64,
    k: usize,
    d: usize,
    out: *mut *mut ExtvarConfig,
) -> ExtvarStatus {
    guard(|| {
        non_null(out, "out")?;
        let coords = view(coords, checked_len(k, d)?, "coords")?;
        let c = lift(Configuration::new(d, coords.to_vec()))?;
        *out = Box::into_raw(Box::new(ExtvarConfig(c)));
        Ok(())
    })
}

/// Number of centroids and data dimension.
///
/// # Safety
/// `config` must be live; `k` and `d` writable.
#[no_mangle]
pub unsafe extern "C" fn extvar_config_shape(
    config: *const ExtvarConfig,
    k: *mut usize,
    d: *mut usize,
) -> ExtvarStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(k, "k")?;
        non_null(d, "d")?;
        *k = (*config).0.len();
        *d = (*config).0.dim();
        Ok(())
    })
}

/// Copy coordinates into `buf` (`len` must be `k * d`).
///
/// # Safety
/// `config` must be live; `buf` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn extvar_config_coords(
    config: *const ExtvarConfig,
    buf: *mut f64,
    len: usize,
) -> ExtvarStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(buf, "buf")?;
        let src = (*config).0.coords();
        if src.len() != len {
            set_error(format!("buffer holds {len} values, need {}", src.len()));
            return Err(ExtvarStatus::InvalidInput);
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn extvar_config_free(config: *mut ExtvarConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Voronoi cell (flat lattice index) of one point.
///
/// # Safety
/// `config` must be live, `point` must hold `d` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn extvar_assign(
    config: *const ExtvarConfig,
    point: *const f64,
    d: usize,
    out: *mut usize,
) -> ExtvarStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(out, "out")?;
        let w = view(point, d, "point")?;
        *out = lift(quantizer::assign(w, &(*config).0))?;
        Ok(())
    })
}

/// Empirical extended variance `V_n`.
///
/// # Safety
/// All handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn extvar_empirical_variance(
    model: *const ExtvarModel,
    samples: *const ExtvarSamples,
    config: *const ExtvarConfig,
    out: *mut f64,
) -> ExtvarStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(samples, "samples")?;
        non_null(config, "config")?;
        non_null(out, "out")?;
        *out = lift(quantizer::empirical_variance(&(*samples).0, &(*config).0, &(*model).lambda))?;
        Ok(())
    })
}

/// Monte Carlo `V` under the uniform distribution on the cube.
///
/// # Safety
/// Handles must be live; `estimate` and `stderr` writable.
#[no_mangle]
pub unsafe extern "C" fn extvar_mc_variance_uniform(
    model: *const ExtvarModel,
    config: *const ExtvarConfig,
    draws: usize,
    seed: u64,
    estimate: *mut f64,
    stderr: *mut f64,
) -> ExtvarStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(config, "config")?;
        non_null(estimate, "estimate")?;
        non_null(stderr, "stderr")?;
        let x = &(*config).0;
        let sampler = lift(Sampler::uniform(x.dim()))?;
        let est = lift(quantizer::mc_variance(x, &(*model).lambda, &sampler, draws, seed))?;
        *estimate = est.estimate;
        *stderr = est.stderr;
        Ok(())
    })
}

/// Default fit parameters.
#[no_mangle]
pub extern "C" fn extvar_fit_params_default() -> ExtvarFitParams {
    let p = optimizer::FitParams::default();
    ExtvarFitParams {
        restarts: p.restarts,
        max_iter: p.max_iter,
        rel_tol: p.rel_tol,
        delta: p.delta,
        init: ExtvarInit::Subsample,
        seed: p.seed,
    }
}

/// Multi-start minimization of `V_n`.
///
/// # Safety
/// Handles must be live, `params` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn extvar_fit(
    model: *const ExtvarModel,
    samples: *const ExtvarSamples,
    params: *const ExtvarFitParams,
    out: *mut *mut ExtvarFitResult,
) -> ExtvarStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(samples, "samples")?;
        non_null(params, "params")?;
        non_null(out, "out")?;
        let p = &*params;
        let fp = optimizer::FitParams {
            restarts: p.restarts,
            max_iter: p.max_iter,
            rel_tol: p.rel_tol,
            delta: p.delta,
            init: match p.init {
                ExtvarInit::Subsample => optimizer::Init::Subsample,
                ExtvarInit::PlusPlus => optimizer::Init::PlusPlus,
            },
            seed: p.seed,
            ..Default::default()
        };
        let m = &*model;
        let res = lift(optimizer::fit(&(*samples).0, &m.lattice, &m.lambda, &fp))?;
        *out = Box::into_raw(Box::new(ExtvarFitResult(res)));
        Ok(())
    })
}

/// Best `V_n` of a fit (NaN for a null handle).
///
/// # Safety
/// `result` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn extvar_fit_result_best_vn(result: *const ExtvarFitResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.0.best_vn)
}

/// New configuration handle holding the best centroids of a fit.
///
/// # Safety
/// `result` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn extvar_fit_result_config(
    result: *const ExtvarFitResult,
    out: *mut *mut ExtvarConfig,
) -> ExtvarStatus {
    guard(|| {
        non_null(result, "result")?;
        non_null(out, "out")?;
        *out = Box::into_raw(Box::new(ExtvarConfig((*result).0.best_config.clone())));
        Ok(())
    })
}

/// # Safety
/// `result` must come from `extvar_fit` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn extvar_fit_result_free(result: *mut ExtvarFitResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// `(|I| − 1)(2α/δ + α)(√2)^{d−1}`, requiring `0 < α < δ/2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn extvar_lemma1_bound(
    alpha: f64,
    delta: f64,
    d: usize,
    card: usize,
    out: *mut f64,
) -> ExtvarStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = lift(theory::lemma1_bound(alpha, delta, d, card))?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    #[test]
    fn null_out_is_reported() {
        let dims = [2usize];
        let st = unsafe { extvar_model_new(dims.as_ptr(), 1, ExtvarKernelKind::Kronecker, 0.0, ptr::null_mut()) };
        assert_eq!(st, ExtvarStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(extvar_last_error()) };
        assert!(msg.to_str().unwrap().contains("out"));
    }

    #[test]
    fn table_asymmetry_is_invalid_input() {
        let dims = [2usize];
        let offs = [0i64, 1, -1];
        let vals = [1.0, 0.5, 0.4];
        let mut m = ptr::null_mut();
        let st = unsafe { extvar_model_new_table(dims.as_ptr(), 1, offs.as_ptr(), vals.as_ptr(), 3, &mut m) };
        assert_eq!(st, ExtvarStatus::InvalidInput);
        assert!(m.is_null());
    }
}
