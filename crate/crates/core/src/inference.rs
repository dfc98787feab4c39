//! Corrected and classical confidence intervals, the debiased ridge map and pivots.

use std::path::Path;

use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate_with, CalibrateOptions, HyperEstimates, MeanCurve};
use crate::data::{Dataset, GlmModel};
use crate::error::{Error, Result};
use crate::fit::{fit_surrogate, FitOptions, FitResult};
use crate::linalg::{inverse_diagonal, weighted_gram};
use crate::link::LinkSpec;
use crate::se::{solve_se, SeParams, SeProblem};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF: rational approximation plus one Halley step.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::OutOfRange(q));
    }
    if q == 0.5 {
        return Ok(0.0);
    }
    // work in the lower tail, where q is represented accurately
    let (p, sign) = if q < 0.5 { (q, 1.0) } else { (1.0 - q, -1.0) };
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    let x = if p < 0.02425 {
        let r = (-2.0 * p.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else {
        let u = p - 0.5;
        let r = u * u;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * u
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    let x = x - u / (1.0 + 0.5 * x * u);
    Ok(sign * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Corrected,
    Classical,
    LinearPredictor,
    DebiasedRidge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiRow {
    pub j: usize,
    pub beta_hat_j: f64,
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    pub tau_hat_j: Option<f64>,
}

impl CiRow {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub alpha: f64,
    pub method_tag: CiMethod,
    pub rows: Vec<CiRow>,
    pub se_params: Option<SeParams>,
    pub hyper: Option<HyperEstimates>,
}

impl CiReport {
    /// Fraction of rows whose interval contains the matching entry of `truth`.
    pub fn coverage(&self, truth: &[f64]) -> Result<f64> {
        if truth.len() != self.rows.len() {
            return Err(Error::DimensionMismatch("truth length differs from the number of intervals".into()));
        }
        let hits = self.rows.iter().zip(truth).filter(|(r, t)| r.contains(**t)).count();
        Ok(hits as f64 / truth.len() as f64)
    }

    /// Flat CSV `j,beta_hat,center,lo,hi,tau_hat`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["j", "beta_hat", "center", "lo", "hi", "tau_hat"])?;
        for r in &self.rows {
            w.write_record([
                r.j.to_string(),
                r.beta_hat_j.to_string(),
                r.center.to_string(),
                r.lo.to_string(),
                r.hi.to_string(),
                r.tau_hat_j.map(|t| t.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange(alpha));
    }
    normal_quantile(1.0 - alpha / 2.0)
}

/// `β̂_j/μ̂ ± z σ̂/(√n μ̂ τ̂_j)`.
pub fn corrected_ci(beta_hat: &[f64], se: &SeParams, tau2_hat: &[f64], alpha: f64, n: usize) -> Result<CiReport> {
    let z = check_alpha(alpha)?;
    if !(se.mu > 0.0) {
        return Err(Error::NonPositiveMu(se.mu));
    }
    if beta_hat.len() != tau2_hat.len() {
        return Err(Error::DimensionMismatch("beta_hat and tau2_hat differ in length".into()));
    }
    let scale = se.sigma() / ((n as f64).sqrt() * se.mu);
    let rows = beta_hat
        .iter()
        .zip(tau2_hat)
        .enumerate()
        .map(|(j, (&b, &t2))| {
            let tau = t2.sqrt();
            let center = b / se.mu;
            let half = z * scale / tau;
            CiRow { j, beta_hat_j: b, center, lo: center - half, hi: center + half, tau_hat_j: Some(tau) }
        })
        .collect();
    Ok(CiReport { alpha, method_tag: CiMethod::Corrected, rows, se_params: Some(*se), hyper: None })
}

/// Wald interval from the empirical Fisher information `n⁻¹ Σ g'(x_iᵀβ̂) x_i x_iᵀ`.
pub fn classical_ci(data: &Dataset, link: &LinkSpec, beta_hat: &[f64], alpha: f64) -> Result<CiReport> {
    let z = check_alpha(alpha)?;
    if beta_hat.len() != data.p() {
        return Err(Error::DimensionMismatch("beta_hat length differs from the number of columns".into()));
    }
    let lin = &data.x * DVector::from_column_slice(beta_hat);
    let w: Vec<f64> = lin.iter().map(|t| link.dg(*t)).collect();
    let chol = Cholesky::new(weighted_gram(&data.x, &w)).ok_or(Error::SingularInformation)?;
    // Î⁻¹_jj / n = [(XᵀWX)⁻¹]_jj
    let diag = inverse_diagonal(&chol);
    let rows = beta_hat
        .iter()
        .zip(&diag)
        .enumerate()
        .map(|(j, (&b, &v))| {
            let half = z * v.sqrt();
            CiRow { j, beta_hat_j: b, center: b, lo: b - half, hi: b + half, tau_hat_j: None }
        })
        .collect();
    Ok(CiReport { alpha, method_tag: CiMethod::Classical, rows, se_params: None, hyper: None })
}

/// Per-observation interval for `x_iᵀβ`: `(x_iᵀβ̂ + η(g(x_iᵀβ̂) − y_i) ± √κ σ z)/μ`.
pub fn linear_predictor_ci(
    data: &Dataset,
    beta_hat: &[f64],
    se: &SeParams,
    link: &LinkSpec,
    alpha: f64,
) -> Result<CiReport> {
    let z = check_alpha(alpha)?;
    if !(se.mu > 0.0) {
        return Err(Error::NonPositiveMu(se.mu));
    }
    if beta_hat.len() != data.p() {
        return Err(Error::DimensionMismatch("beta_hat length differs from the number of columns".into()));
    }
    let lin = &data.x * DVector::from_column_slice(beta_hat);
    let half = (data.kappa() * se.sigma2).sqrt() * z / se.mu;
    let rows = lin
        .iter()
        .zip(data.y.iter())
        .enumerate()
        .map(|(i, (&l, &y))| {
            let center = (l + se.eta * (link.g(l) - y)) / se.mu;
            CiRow { j: i, beta_hat_j: l, center, lo: center - half, hi: center + half, tau_hat_j: None }
        })
        .collect();
    Ok(CiReport { alpha, method_tag: CiMethod::LinearPredictor, rows, se_params: Some(*se), hyper: None })
}

/// Standardized `√n(β̂_j − μ̂β_j) τ̂_j / σ̂` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotSample {
    pub values: Vec<f64>,
}

pub fn pivot_stats(
    beta_hat: &[f64],
    beta_true: Option<&[f64]>,
    se: &SeParams,
    tau2_hat: &[f64],
    n: usize,
) -> Result<PivotSample> {
    let beta = beta_true.ok_or(Error::MissingTruth)?;
    if beta.len() != beta_hat.len() || tau2_hat.len() != beta_hat.len() {
        return Err(Error::DimensionMismatch("pivot inputs differ in length".into()));
    }
    let root_n = (n as f64).sqrt();
    let s = se.sigma();
    let values =
        beta_hat.iter().zip(beta).zip(tau2_hat).map(|((b, t), t2)| root_n * (b - se.mu * t) * t2.sqrt() / s).collect();
    Ok(PivotSample { values })
}

/// Options for the end-to-end pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferOptions {
    pub alpha: f64,
    pub seed: u64,
    /// Panel size of the γ̂ mean curve.
    pub curve_samples: usize,
    /// Panel size of the SE solve.
    pub se_samples: usize,
    pub se_damping: f64,
    pub se_tol: f64,
    pub se_init: Option<SeParams>,
    pub fit: FitOptions,
    pub classical: bool,
}

impl InferOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            alpha: 0.1,
            seed,
            curve_samples: 1_000_000,
            se_samples: 200_000,
            se_damping: 0.5,
            se_tol: 1e-6,
            se_init: None,
            fit: FitOptions::default(),
            classical: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferOutput {
    pub fit: FitResult,
    pub hyper: HyperEstimates,
    pub se: SeParams,
    pub corrected: CiReport,
    pub classical: Option<CiReport>,
}

/// Calibrate, fit, solve SE at `(p/n, γ̂²)` and build intervals.
pub fn infer(data: &Dataset, model: &GlmModel, opts: &InferOptions) -> Result<InferOutput> {
    let cal = CalibrateOptions { mc_samples: opts.curve_samples, seed: opts.seed, bracket_hi: 1.0 };
    let curve = MeanCurve::new(cal.mc_samples, cal.seed);
    infer_with_curve(&curve, data, model, opts)
}

pub fn infer_with_curve(curve: &MeanCurve, data: &Dataset, model: &GlmModel, opts: &InferOptions) -> Result<InferOutput> {
    let hyper = calibrate_with(curve, data, model, 1.0)?;
    let fit = fit_surrogate(data, &model.link, &opts.fit)?;
    if fit.diverged {
        return Err(Error::Diverged);
    }
    if !fit.converged {
        return Err(Error::NoConvergence(fit.iterations));
    }
    let prob = SeProblem {
        mc_samples: opts.se_samples,
        seed: crate::rng::derive_seed(opts.seed, 0x5E5E, 0),
        damping: opts.se_damping,
        tol: opts.se_tol,
        init: opts.se_init,
        ..SeProblem::new(data.kappa(), hyper.gamma2_hat, *model)
    };
    let se = solve_se(&prob)?;
    let mut corrected = corrected_ci(fit.beta_hat.as_slice(), &se, &hyper.tau2_hat, opts.alpha, data.n())?;
    corrected.hyper = Some(hyper.clone());
    let classical = if opts.classical {
        Some(classical_ci(data, &model.link, fit.beta_hat.as_slice(), opts.alpha)?)
    } else {
        None
    };
    Ok(InferOutput { fit, hyper, se, corrected, classical })
}

/// `β̂_λ + η J'(β̂_λ)` for the penalty `λ J` with `J(t) = t²`, i.e. `(1 + 2λη) β̂_λ`.
///
/// `lambda` is on the state-evolution scale (fit penalty `n λ Σ b_j²`).
pub fn debias_ridge(beta_ridge: &[f64], eta: f64, lambda: f64) -> Vec<f64> {
    let c = 1.0 + 2.0 * lambda * eta;
    beta_ridge.iter().map(|b| c * b).collect()
}

/// Bias and scale of the debiased ridge estimator: `((1 + 2λη) μ, (1 + 2λη)² σ²)`.
pub fn debiased_ridge_params(se: &SeParams, lambda: f64) -> SeParams {
    let c = 1.0 + 2.0 * lambda * se.eta;
    SeParams { mu: c * se.mu, sigma2: c * c * se.sigma2, eta: se.eta }
}

/// Corrected intervals built from the debiased ridge estimator.
pub fn debiased_ridge_ci(
    beta_ridge: &[f64],
    se: &SeParams,
    lambda: f64,
    tau2_hat: &[f64],
    alpha: f64,
    n: usize,
) -> Result<CiReport> {
    let d = debias_ridge(beta_ridge, se.eta, lambda);
    let mut report = corrected_ci(&d, &debiased_ridge_params(se, lambda), tau2_hat, alpha, n)?;
    report.method_tag = CiMethod::DebiasedRidge;
    Ok(report)
}
