//! Surrogate-loss estimation: damped Newton, ridge, and the GAMP recursion.

use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceModel;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::weighted_gram;
use crate::link::LinkSpec;
use crate::prox::prox_unchecked;
use crate::se::SeParams;

/// Σ_i G(x_iᵀb) − y_i x_iᵀb.
pub fn surrogate_loss(b: &DVector<f64>, data: &Dataset, link: &LinkSpec) -> Result<f64> {
    link.require_monotone()?;
    if b.len() != data.p() {
        return Err(Error::DimensionMismatch(format!("b has {} entries, X has {} columns", b.len(), data.p())));
    }
    let eta = &data.x * b;
    Ok(loss_at(link, &eta, &data.y))
}

/// Gradient Xᵀ(g(Xb) − y).
pub fn surrogate_gradient(b: &DVector<f64>, data: &Dataset, link: &LinkSpec) -> Result<DVector<f64>> {
    link.require_monotone()?;
    let eta = &data.x * b;
    let r = DVector::from_iterator(data.n(), eta.iter().zip(data.y.iter()).map(|(e, y)| link.g(*e) - y));
    Ok(data.x.tr_mul(&r))
}

fn loss_at(link: &LinkSpec, eta: &DVector<f64>, y: &DVector<f64>) -> f64 {
    eta.iter().zip(y.iter()).map(|(e, yi)| link.big_g(*e) - yi * e).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence when ‖∇‖/n falls below this.
    pub grad_tol: f64,
    /// ‖b‖ beyond which the estimator is declared non-existent.
    pub max_norm: f64,
    /// Consecutive non-contracting steps with growing ‖b‖ before declaring divergence.
    pub max_stalls: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iter: 200, grad_tol: 1e-8, max_norm: 1e6, max_stalls: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub diverged: bool,
}

/// Unpenalized surrogate estimator.
pub fn fit_surrogate(data: &Dataset, link: &LinkSpec, opts: &FitOptions) -> Result<FitResult> {
    link.require_monotone()?;
    if data.n() <= data.p() {
        return Err(Error::SingularHessian);
    }
    newton(data, link, 0.0, opts)
}

/// Surrogate loss plus `lambda * Σ b_j²`.
pub fn fit_ridge(data: &Dataset, link: &LinkSpec, lambda: f64, opts: &FitOptions) -> Result<FitResult> {
    link.require_monotone()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("ridge penalty must be positive, got {lambda}")));
    }
    newton(data, link, lambda, opts)
}

fn newton(data: &Dataset, link: &LinkSpec, lambda: f64, opts: &FitOptions) -> Result<FitResult> {
    let (n, p) = (data.n(), data.p());
    let x = &data.x;
    let y = &data.y;
    let mut b = DVector::<f64>::zeros(p);
    let mut eta = DVector::<f64>::zeros(n);
    let mut prev_step = f64::INFINITY;
    let mut stalls = 0usize;
    let mut grad_norm = f64::INFINITY;
    let mut diverged = false;
    let mut converged = false;
    let mut iterations = 0;

    let objective = |eta: &DVector<f64>, b: &DVector<f64>| loss_at(link, eta, y) + lambda * b.norm_squared();

    for it in 0..=opts.max_iter {
        iterations = it;
        let resid: Vec<f64> = eta.iter().zip(y.iter()).map(|(e, yi)| link.g(*e) - yi).collect();
        let mut grad = x.tr_mul(&DVector::from_column_slice(&resid));
        if lambda > 0.0 {
            grad.axpy(2.0 * lambda, &b, 1.0);
        }
        grad_norm = grad.norm();
        if !grad_norm.is_finite() {
            diverged = true;
            break;
        }
        if grad_norm / n as f64 <= opts.grad_tol {
            converged = true;
            break;
        }
        if b.norm() > opts.max_norm {
            diverged = true;
            break;
        }
        if it == opts.max_iter {
            break;
        }

        let w: Vec<f64> = eta.iter().map(|e| link.dg(*e)).collect();
        let mut h = weighted_gram(x, &w);
        if lambda > 0.0 {
            for j in 0..p {
                h[(j, j)] += 2.0 * lambda;
            }
        }
        let chol = match Cholesky::new(h) {
            Some(c) => c,
            None if stalls > 0 => {
                diverged = true;
                break;
            }
            None => return Err(Error::SingularHessian),
        };
        let d = -chol.solve(&grad);
        let u = x * &d;

        let f0 = objective(&eta, &b);
        let slope0 = grad.dot(&d);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let eta_t = &eta + &u * t;
            let b_t = &b + &d * t;
            let ft = objective(&eta_t, &b_t);
            let armijo = ft <= f0 + 1e-4 * t * slope0;
            // still descending at t means phi(t) < phi(0) by convexity
            let descending = ft <= f0 && {
                let dphi: f64 = eta_t.iter().zip(y.iter()).zip(u.iter()).map(|((e, yi), ui)| (link.g(*e) - yi) * ui).sum::<f64>()
                    + 2.0 * lambda * b_t.dot(&d);
                dphi <= 0.0
            };
            if ft.is_finite() && (armijo || descending) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }

        let norm_before = b.norm();
        b.axpy(t, &d, 1.0);
        eta = x * &b;
        let step = t * d.norm();
        if step >= 0.5 * prev_step && b.norm() > norm_before {
            stalls += 1;
        } else {
            stalls = 0;
        }
        prev_step = step;
        if stalls >= opts.max_stalls {
            diverged = true;
            iterations = it + 1;
            break;
        }
    }

    Ok(FitResult { beta_hat: b, converged, iterations, final_gradient_norm: grad_norm, diverged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GampOptions {
    pub max_iter: usize,
    /// Stop when ‖β^{k+1} − β^k‖ / max(1, ‖β^k‖) falls below this.
    pub tol: f64,
    /// Fraction of the β increment applied per step (1 = undamped).
    pub damping: f64,
}

impl Default for GampOptions {
    fn default() -> Self {
        Self { max_iter: 5000, tol: 1e-8, damping: 1.0 }
    }
}

/// Iterate of the stationary GAMP recursion, in the √n-scaled coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GampState {
    pub beta_k: DVector<f64>,
    pub xi_k: DVector<f64>,
    pub eta_bar: f64,
    pub mu_bar: f64,
    pub sigma2_bar: f64,
    pub k: usize,
}

impl GampState {
    /// Cold start `β⁰ = 0`, `ξ⁰ = 0`.
    pub fn start(data: &Dataset, se: &SeParams) -> Self {
        Self {
            beta_k: DVector::zeros(data.p()),
            xi_k: DVector::zeros(data.n()),
            eta_bar: se.eta,
            mu_bar: se.mu,
            sigma2_bar: se.sigma2,
            k: 0,
        }
    }

    /// The state whose fixed point is the estimator `beta_hat`.
    pub fn at_estimate(data: &Dataset, link: &LinkSpec, beta_hat: &DVector<f64>, se: &SeParams) -> Self {
        let sqrt_n = (data.n() as f64).sqrt();
        let lin = &data.x * beta_hat;
        let xi = DVector::from_iterator(
            data.n(),
            lin.iter().zip(data.y.iter()).map(|(l, y)| l - se.eta * (y - link.g(*l))),
        );
        Self { beta_k: beta_hat * sqrt_n, xi_k: xi, eta_bar: se.eta, mu_bar: se.mu, sigma2_bar: se.sigma2, k: 0 }
    }

    /// Estimator in the original scale, `β^k / √n`.
    pub fn beta_hat(&self) -> DVector<f64> {
        &self.beta_k / (self.xi_k.len() as f64).sqrt()
    }
}

/// One stationary GAMP step; returns the relative change in β.
pub fn gamp_step(state: &mut GampState, data: &Dataset, link: &LinkSpec, damping: f64) -> Result<f64> {
    let n = data.n();
    let sqrt_n = (n as f64).sqrt();
    let kappa = data.kappa();
    let eta = state.eta_bar;
    let mut r = DVector::<f64>::zeros(n);
    for i in 0..n {
        let y = data.y[i];
        let d = prox_unchecked(link, eta, state.xi_k[i] + eta * y)?;
        r[i] = y - link.g(d);
    }
    let mut inc = data.x.tr_mul(&r);
    inc *= damping * eta / (kappa * sqrt_n);
    let change = inc.norm() / state.beta_k.norm().max(1.0);
    state.beta_k += &inc;
    let mut xi = &data.x * &state.beta_k;
    xi /= sqrt_n;
    xi.axpy(-eta, &r, 1.0);
    state.xi_k = xi;
    state.k += 1;
    if !change.is_finite() {
        return Err(Error::NoConvergence(state.k));
    }
    Ok(change)
}

/// Runs stationary GAMP with `η̄ = se.eta` from a cold start.
pub fn gamp_fit(data: &Dataset, link: &LinkSpec, se: &SeParams, opts: &GampOptions) -> Result<GampState> {
    link.require_monotone()?;
    let kappa = data.kappa();
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidArgument(format!("GAMP needs p/n in (0, 1), got {kappa}")));
    }
    if !(se.eta > 0.0) {
        return Err(Error::InvalidArgument(format!("GAMP needs a positive prox scale, got {}", se.eta)));
    }
    let mut state = GampState::start(data, se);
    for _ in 0..opts.max_iter {
        if gamp_step(&mut state, data, link, opts.damping)? < opts.tol {
            return Ok(state);
        }
    }
    Err(Error::NoConvergence(opts.max_iter))
}

/// `(μ_n, σ_n²)` with `θ = Lᵀβ`: `μ_n = θ̂ᵀθ/‖θ‖²`, `σ_n² = ‖θ̂ − μ_nθ‖²/κ`.
pub fn empirical_se(
    beta_hat: &DVector<f64>,
    beta_true: Option<&DVector<f64>>,
    cov: &CovarianceModel,
    n: usize,
) -> Result<(f64, f64)> {
    let beta = beta_true.ok_or(Error::MissingTruth)?;
    if beta.len() != beta_hat.len() {
        return Err(Error::DimensionMismatch("estimate and truth differ in length".into()));
    }
    let theta = cov.lt_mul(beta.as_slice())?;
    let theta_hat = cov.lt_mul(beta_hat.as_slice())?;
    let tt: f64 = theta.iter().map(|v| v * v).sum();
    let mu = theta_hat.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() / tt;
    let kappa = beta.len() as f64 / n as f64;
    let s2 = theta_hat.iter().zip(&theta).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>() / kappa;
    Ok((mu, s2))
}
