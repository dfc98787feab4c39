//! C ABI over `hdglm`.
//!
//! Every function returns an [`HdglmStatus`]; on failure the message is kept in
//! thread-local storage and read with [`hdglm_last_error`]. Models and datasets
//! are opaque handles released with their `_free` functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hdglm::calibrate::{estimate_gamma2, estimate_tau2};
use hdglm::covariance::CovarianceModel;
use hdglm::data::{sample_dataset, Dataset, GlmModel, SyntheticConfig};
use hdglm::fit::{fit_surrogate, FitOptions};
use hdglm::inference::{corrected_ci, infer, normal_quantile, InferOptions};
use nalgebra::{DMatrix, DVector};
use hdglm::se::{solve_se, SeParams, SeProblem};
use hdglm::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdglmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonMonotoneLink = 4,
    OddLink = 5,
    NoConvergence = 6,
    Diverged = 7,
    Singular = 8,
    NumericFailure = 9,
    Io = 10,
    Panic = 11,
}

/// Opaque GLM model (inverse link plus response law).
pub struct HdglmModel(GlmModel);

/// Opaque dataset: row-major features, responses and optional true coefficients.
pub struct HdglmDataset(Dataset);

/// State-evolution parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdglmSeParams {
    pub mu: f64,
    pub sigma2: f64,
    pub eta: f64,
}

impl From<SeParams> for HdglmSeParams {
    fn from(p: SeParams) -> Self {
        Self { mu: p.mu, sigma2: p.sigma2, eta: p.eta }
    }
}

impl From<HdglmSeParams> for SeParams {
    fn from(p: HdglmSeParams) -> Self {
        SeParams { mu: p.mu, sigma2: p.sigma2, eta: p.eta }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HdglmStatus {
    match e {
        Error::InvalidArgument(_)
        | Error::InvalidLinkParameter(_)
        | Error::InvalidRate(_)
        | Error::OutOfRange(_)
        | Error::Parse(_)
        | Error::MissingTruth
        | Error::TooFewSamples { .. }
        | Error::InsufficientData(_) => HdglmStatus::InvalidArgument,
        Error::DimensionMismatch(_) => HdglmStatus::DimensionMismatch,
        Error::NonMonotoneLink => HdglmStatus::NonMonotoneLink,
        Error::OddLink => HdglmStatus::OddLink,
        Error::NoConvergence(_) => HdglmStatus::NoConvergence,
        Error::Diverged => HdglmStatus::Diverged,
        Error::SingularHessian | Error::SingularInformation | Error::RankDeficient => HdglmStatus::Singular,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => HdglmStatus::Io,
        _ => HdglmStatus::NumericFailure,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HdglmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HdglmStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            HdglmStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            HdglmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string(p: *const c_char, what: &'static str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail::Lib(Error::Parse(format!("{what} is not valid UTF-8"))))
}

unsafe fn write<T>(p: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    p.write(v);
    Ok(())
}

fn check_len(got: usize, want: usize, what: &str) -> Result<(), Fail> {
    if got != want {
        return Err(Fail::Lib(Error::DimensionMismatch(format!("{what}: buffer length {got}, expected {want}"))));
    }
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hdglm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a model from a preset name (`poisson-clippedexp`, `logistic`, ...) or `law/link`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hdglm_model_new(name: *const c_char, out: *mut *mut HdglmModel) -> HdglmStatus {
    guard(|| {
        let model: GlmModel = string(name, "name")?.parse()?;
        write(out, Box::into_raw(Box::new(HdglmModel(model))), "out")
    })
}

/// # Safety
/// `model` must come from [`hdglm_model_new`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn hdglm_model_free(model: *mut HdglmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Draws a synthetic dataset. `covariance` is `identity`, `ar1:rho`, or NULL for identity.
///
/// # Safety
/// Pointers must be valid; `covariance` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hdglm_dataset_generate(
    model: *const HdglmModel,
    n: usize,
    p: usize,
    gamma2: f64,
    seed: u64,
    covariance: *const c_char,
    out: *mut *mut HdglmDataset,
) -> HdglmStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let cov = if covariance.is_null() {
            CovarianceModel::Identity
        } else {
            string(covariance, "covariance")?.parse()?
        };
        let data = sample_dataset(&SyntheticConfig::new(n, p, gamma2, seed), &model.0, &cov)?;
        write(out, Box::into_raw(Box::new(HdglmDataset(data))), "out")
    })
}

/// Wraps caller data: `x` is `n × p` row-major, `y` has length `n`.
///
/// # Safety
/// `x` must hold `n*p` values and `y` `n` values.
#[no_mangle]
pub unsafe extern "C" fn hdglm_dataset_from_arrays(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut HdglmDataset,
) -> HdglmStatus {
    guard(|| {
        let len = n.checked_mul(p).ok_or(Fail::Lib(Error::InvalidArgument("n * p overflows".into())))?;
        let xs = slice(x, len, "x")?;
        let ys = slice(y, n, "y")?;
        let data = Dataset::new(DMatrix::from_row_slice(n, p, xs), DVector::from_column_slice(ys), None)?;
        write(out, Box::into_raw(Box::new(HdglmDataset(data))), "out")
    })
}

/// # Safety
/// `data` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn hdglm_dataset_free(data: *mut HdglmDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hdglm_dataset_dims(data: *const HdglmDataset, n: *mut usize, p: *mut usize) -> HdglmStatus {
    guard(|| {
        let d = deref(data, "data")?;
        write(n, d.0.n(), "n")?;
        write(p, d.0.p(), "p")
    })
}

/// Copies the true coefficients of a synthetic dataset into `out[0..p]`.
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn hdglm_dataset_beta_true(data: *const HdglmDataset, out: *mut f64, len: usize) -> HdglmStatus {
    guard(|| {
        let d = deref(data, "data")?;
        let beta = d.0.truth()?;
        check_len(len, beta.len(), "beta")?;
        slice_mut(out, len, "out")?.copy_from_slice(beta.as_slice());
        Ok(())
    })
}

/// `prox_{ηG}(x)` for the model's link.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hdglm_prox(model: *const HdglmModel, eta: f64, x: f64, out: *mut f64) -> HdglmStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, hdglm::prox::prox(&m.0.link, eta, x)?, "out")
    })
}

/// Surrogate-loss estimate into `beta_out[0..p]`; `converged` may be NULL.
///
/// # Safety
/// `beta_out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn hdglm_fit(
    model: *const HdglmModel,
    data: *const HdglmDataset,
    beta_out: *mut f64,
    len: usize,
    converged: *mut bool,
) -> HdglmStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let d = deref(data, "data")?;
        check_len(len, d.0.p(), "beta_out")?;
        let res = fit_surrogate(&d.0, &m.0.link, &FitOptions::default())?;
        if res.diverged {
            return Err(Error::Diverged.into());
        }
        slice_mut(beta_out, len, "beta_out")?.copy_from_slice(res.beta_hat.as_slice());
        if !converged.is_null() {
            converged.write(res.converged);
        }
        Ok(())
    })
}

/// Solves the state-evolution system (ridge form when `lambda > 0`).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hdglm_se_solve(
    model: *const HdglmModel,
    kappa: f64,
    gamma2: f64,
    lambda: f64,
    mc_samples: usize,
    seed: u64,
    out: *mut HdglmSeParams,
) -> HdglmStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let prob = SeProblem { lambda, mc_samples, seed, ..SeProblem::new(kappa, gamma2, m.0) };
        write(out, solve_se(&prob)?.into(), "out")
    })
}

/// γ̂² from the mean response of `data`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hdglm_estimate_gamma2(
    model: *const HdglmModel,
    data: *const HdglmDataset,
    mc_samples: usize,
    seed: u64,
    out: *mut f64,
) -> HdglmStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let d = deref(data, "data")?;
        write(out, estimate_gamma2(d.0.y_mean(), &m.0.link, mc_samples, seed, 1.0)?, "out")
    })
}

/// τ̂_j² for every column into `out[0..p]`.
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn hdglm_estimate_tau2(data: *const HdglmDataset, out: *mut f64, len: usize) -> HdglmStatus {
    guard(|| {
        let d = deref(data, "data")?;
        check_len(len, d.0.p(), "out")?;
        let t = estimate_tau2(&d.0)?;
        slice_mut(out, len, "out")?.copy_from_slice(&t);
        Ok(())
    })
}

/// Corrected intervals `β̂_j/μ ± z σ/(√n μ τ̂_j)` for `len` coordinates.
///
/// # Safety
/// Every array must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn hdglm_corrected_ci(
    beta_hat: *const f64,
    tau2_hat: *const f64,
    len: usize,
    se: *const HdglmSeParams,
    alpha: f64,
    n: usize,
    lo: *mut f64,
    hi: *mut f64,
) -> HdglmStatus {
    guard(|| {
        let b = slice(beta_hat, len, "beta_hat")?;
        let t = slice(tau2_hat, len, "tau2_hat")?;
        let se: SeParams = (*deref(se, "se")?).into();
        let report = corrected_ci(b, &se, t, alpha, n)?;
        let lo = slice_mut(lo, len, "lo")?;
        let hi = slice_mut(hi, len, "hi")?;
        for (k, r) in report.rows.iter().enumerate() {
            lo[k] = r.lo;
            hi[k] = r.hi;
        }
        Ok(())
    })
}

/// Full pipeline: calibrate, fit, solve SE at γ̂², corrected intervals.
/// `se_out` and `gamma2_out` may be NULL.
///
/// # Safety
/// `lo` and `hi` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn hdglm_infer(
    model: *const HdglmModel,
    data: *const HdglmDataset,
    seed: u64,
    alpha: f64,
    curve_samples: usize,
    se_samples: usize,
    lo: *mut f64,
    hi: *mut f64,
    len: usize,
    se_out: *mut HdglmSeParams,
    gamma2_out: *mut f64,
) -> HdglmStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let d = deref(data, "data")?;
        check_len(len, d.0.p(), "lo/hi")?;
        let opts = InferOptions { alpha, curve_samples, se_samples, classical: false, ..InferOptions::new(seed) };
        let out = infer(&d.0, &m.0, &opts)?;
        let lo = slice_mut(lo, len, "lo")?;
        let hi = slice_mut(hi, len, "hi")?;
        for (k, r) in out.corrected.rows.iter().enumerate() {
            lo[k] = r.lo;
            hi[k] = r.hi;
        }
        if !se_out.is_null() {
            se_out.write(out.se.into());
        }
        if !gamma2_out.is_null() {
            gamma2_out.write(out.hyper.gamma2_hat);
        }
        Ok(())
    })
}

/// Standard normal quantile.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hdglm_normal_quantile(q: f64, out: *mut f64) -> HdglmStatus {
    guard(|| write(out, normal_quantile(q)?, "out"))
}
