use std::ffi::{CStr, CString};
use std::ptr;

use hdglm_ffi::*;

fn last_error() -> String {
    let p = hdglm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn model(name: &str) -> *mut HdglmModel {
    let name = CString::new(name).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hdglm_model_new(name.as_ptr(), &mut m) }, HdglmStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn unknown_model_sets_error() {
    let name = CString::new("no-such-model").unwrap();
    let mut m = ptr::null_mut();
    let s = unsafe { hdglm_model_new(name.as_ptr(), &mut m) };
    assert_eq!(s, HdglmStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(last_error().contains("no-such-model"));
}

#[test]
fn null_pointers_are_reported() {
    let mut out = 0.0;
    assert_eq!(unsafe { hdglm_prox(ptr::null(), 1.0, 0.0, &mut out) }, HdglmStatus::NullPointer);
    assert!(last_error().contains("model"));
    let m = model("logistic");
    assert_eq!(unsafe { hdglm_prox(m, 1.0, 0.0, ptr::null_mut()) }, HdglmStatus::NullPointer);
    unsafe { hdglm_model_free(m) };
    unsafe { hdglm_model_free(ptr::null_mut()) };
    unsafe { hdglm_dataset_free(ptr::null_mut()) };
}

#[test]
fn prox_satisfies_its_defining_equation() {
    let m = model("logistic");
    let mut z = 0.0;
    assert_eq!(unsafe { hdglm_prox(m, 0.7, 1.3, &mut z) }, HdglmStatus::Ok);
    let g = 1.0 / (1.0 + (-z).exp());
    assert!((z + 0.7 * g - 1.3).abs() < 1e-12);
    assert_eq!(unsafe { hdglm_prox(m, -1.0, 1.3, &mut z) }, HdglmStatus::InvalidArgument);
    unsafe { hdglm_model_free(m) };
}

#[test]
fn normal_quantile_matches_reference() {
    let mut z = 0.0;
    assert_eq!(unsafe { hdglm_normal_quantile(0.975, &mut z) }, HdglmStatus::Ok);
    assert!((z - 1.959_963_984_540_054).abs() < 1e-12);
    assert_eq!(unsafe { hdglm_normal_quantile(1.0, &mut z) }, HdglmStatus::InvalidArgument);
}

#[test]
fn generate_fit_and_interval_round_trip() {
    let m = model("poisson-clippedexp");
    let mut d = ptr::null_mut();
    let cov = CString::new("ar1:0.5").unwrap();
    assert_eq!(unsafe { hdglm_dataset_generate(m, 400, 40, 1.0, 11, cov.as_ptr(), &mut d) }, HdglmStatus::Ok);
    let (mut n, mut p) = (0usize, 0usize);
    assert_eq!(unsafe { hdglm_dataset_dims(d, &mut n, &mut p) }, HdglmStatus::Ok);
    assert_eq!((n, p), (400, 40));

    let mut beta = vec![0.0; p];
    assert_eq!(unsafe { hdglm_dataset_beta_true(d, beta.as_mut_ptr(), p) }, HdglmStatus::Ok);
    let mut beta_hat = vec![0.0; p];
    let mut converged = false;
    assert_eq!(unsafe { hdglm_fit(m, d, beta_hat.as_mut_ptr(), p, &mut converged) }, HdglmStatus::Ok);
    assert!(converged);
    assert_eq!(unsafe { hdglm_fit(m, d, beta_hat.as_mut_ptr(), p - 1, &mut converged) }, HdglmStatus::DimensionMismatch);

    let mut tau2 = vec![0.0; p];
    assert_eq!(unsafe { hdglm_estimate_tau2(d, tau2.as_mut_ptr(), p) }, HdglmStatus::Ok);
    assert!(tau2.iter().all(|t| *t > 0.0));

    let mut g2 = 0.0;
    assert_eq!(unsafe { hdglm_estimate_gamma2(m, d, 100_000, 3, &mut g2) }, HdglmStatus::Ok);
    assert!(g2 > 0.3 && g2 < 3.0, "{g2}");

    let mut se = HdglmSeParams { mu: 0.0, sigma2: 0.0, eta: 0.0 };
    assert_eq!(unsafe { hdglm_se_solve(m, 0.1, g2, 0.0, 20_000, 5, &mut se) }, HdglmStatus::Ok);
    assert!(se.mu > 0.0 && se.sigma2 > 0.0 && se.eta > 0.0);

    let (mut lo, mut hi) = (vec![0.0; p], vec![0.0; p]);
    let s = unsafe {
        hdglm_corrected_ci(beta_hat.as_ptr(), tau2.as_ptr(), p, &se, 0.1, n, lo.as_mut_ptr(), hi.as_mut_ptr())
    };
    assert_eq!(s, HdglmStatus::Ok);
    assert!(lo.iter().zip(&hi).all(|(l, h)| l < h));

    let (mut lo2, mut hi2) = (vec![0.0; p], vec![0.0; p]);
    let mut se2 = HdglmSeParams { mu: 0.0, sigma2: 0.0, eta: 0.0 };
    let mut g2b = 0.0;
    let s = unsafe {
        hdglm_infer(m, d, 3, 0.1, 100_000, 20_000, lo2.as_mut_ptr(), hi2.as_mut_ptr(), p, &mut se2, &mut g2b)
    };
    assert_eq!(s, HdglmStatus::Ok);
    assert!((g2b - g2).abs() < 1e-12);
    let covered = beta.iter().zip(lo2.iter().zip(&hi2)).filter(|&(b, (l, h))| l <= b && b <= h).count();
    assert!(covered >= p / 2, "{covered} of {p}");

    unsafe {
        hdglm_dataset_free(d);
        hdglm_model_free(m);
    }
}

#[test]
fn caller_arrays_and_odd_link() {
    let (n, p) = (30usize, 2usize);
    let x: Vec<f64> = (0..n * p).map(|k| ((k * 37 % 11) as f64 - 5.0) / 3.0).collect();
    let y: Vec<f64> = (0..n).map(|i| x[i * p] - 0.5 * x[i * p + 1]).collect();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { hdglm_dataset_from_arrays(x.as_ptr(), y.as_ptr(), n, p, &mut d) }, HdglmStatus::Ok);
    let m = model("linear");
    let mut b = [0.0; 2];
    assert_eq!(unsafe { hdglm_fit(m, d, b.as_mut_ptr(), 2, ptr::null_mut()) }, HdglmStatus::Ok);
    assert!((b[0] - 1.0).abs() < 1e-8 && (b[1] + 0.5).abs() < 1e-8);
    let mut g2 = 0.0;
    assert_eq!(unsafe { hdglm_estimate_gamma2(m, d, 1000, 1, &mut g2) }, HdglmStatus::OddLink);
    let mut beta = [0.0; 2];
    assert_eq!(unsafe { hdglm_dataset_beta_true(d, beta.as_mut_ptr(), 2) }, HdglmStatus::InvalidArgument);
    unsafe {
        hdglm_dataset_free(d);
        hdglm_model_free(m);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hdglm.h")).unwrap();
    for name in [
        "hdglm_last_error",
        "hdglm_model_new",
        "hdglm_model_free",
        "hdglm_dataset_generate",
        "hdglm_dataset_from_arrays",
        "hdglm_dataset_free",
        "hdglm_prox",
        "hdglm_fit",
        "hdglm_se_solve",
        "hdglm_estimate_gamma2",
        "hdglm_estimate_tau2",
        "hdglm_corrected_ci",
        "hdglm_infer",
        "hdglm_normal_quantile",
        "typedef struct HdglmModel HdglmModel",
        "HDGLM_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
