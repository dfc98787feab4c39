//! State-evolution fixed points `(μ, σ², η)` by damped Monte-Carlo iteration.
//!
//! With `Z = γQ₁` and `D = prox_{ηG}(μZ + √κσQ₂ + ηȲ)` the system reads
//!
//! ```text
//! κ²σ²          = η² E[(Ȳ − g(D))²]
//! 2γ²λμ         = E[Z(Ȳ − g(D))]
//! 1 − κ + 2λη   = E[1/(1 + ηg'(D))]
//! ```
//!
//! (λ = 0 for the unpenalized estimator). Writing A, B, C for the three
//! expectations at the current iterate, the update is
//!
//! ```text
//! η' = κη / (1 − A + 2λη)
//! μ' = μ + η'(B − 2γ²λμ) / (κγ²)
//! σ²' = η'² C / κ²
//! ```
//!
//! whose fixed points are exactly the solutions of the system.

use rand_distr::{Distribution, StandardNormal};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::GlmModel;
use crate::error::{Error, Result};
use crate::link::LinkSpec;
use crate::prox::prox_unchecked;
use crate::rng::{mix64, stream_rng};

const STREAM_PANEL: u64 = 0x5E;
const CHUNK: usize = 8192;
const MIN_GAMMA2: f64 = 1e-8;

/// Bias factor μ, variance factor σ² and prox scale η.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeParams {
    pub mu: f64,
    pub sigma2: f64,
    pub eta: f64,
}

impl SeParams {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    fn max_rel_change(&self, other: &SeParams) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1e-12);
        rel(self.mu, other.mu).max(rel(self.sigma2, other.sigma2)).max(rel(self.eta, other.eta))
    }

    /// Largest componentwise relative difference.
    pub fn rel_diff(&self, other: &SeParams) -> f64 {
        self.max_rel_change(other)
    }
}

/// Inputs of a state-evolution solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeProblem {
    pub kappa: f64,
    pub gamma2: f64,
    pub model: GlmModel,
    pub lambda: f64,
    pub mc_samples: usize,
    pub seed: u64,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; defaults to `(1, κγ² + 1, 1)`.
    pub init: Option<SeParams>,
}

impl SeProblem {
    pub fn new(kappa: f64, gamma2: f64, model: GlmModel) -> Self {
        Self {
            kappa,
            gamma2,
            model,
            lambda: 0.0,
            mc_samples: 200_000,
            seed: 0,
            damping: 0.5,
            tol: 1e-6,
            max_iter: 2000,
            init: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidArgument(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if self.lambda == 0.0 && self.kappa >= 1.0 {
            return Err(Error::InvalidArgument(format!("unpenalized mode needs kappa < 1, got {}", self.kappa)));
        }
        if !self.gamma2.is_finite() || self.gamma2 < 0.0 {
            return Err(Error::InvalidArgument(format!("gamma2 must be positive, got {}", self.gamma2)));
        }
        if self.gamma2 < MIN_GAMMA2 {
            return Err(Error::DegenerateSignal);
        }
        if self.mc_samples == 0 {
            return Err(Error::InvalidArgument("need at least one Monte-Carlo sample".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        self.model.link.require_monotone()
    }

    pub fn default_init(&self) -> SeParams {
        SeParams { mu: 1.0, sigma2: self.kappa * self.gamma2 + 1.0, eta: 1.0 }
    }
}

/// Common random numbers `(Q₁, Q₂, ε̄, Ȳ)` shared by every iteration of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct McPanel {
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    /// Noise keys ε̄ (see [`crate::response`]).
    pub noise: Vec<u64>,
    pub y_bar: Vec<f64>,
    pub gamma2: f64,
}

impl McPanel {
    /// Draws `m` panel rows for `Ȳ = h(γQ₁, ε̄)`.
    pub fn new(model: &GlmModel, gamma2: f64, m: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, STREAM_PANEL, 0);
        let mut q1 = Vec::with_capacity(m);
        let mut q2 = Vec::with_capacity(m);
        let mut noise = Vec::with_capacity(m);
        for _ in 0..m {
            q1.push(StandardNormal.sample(&mut rng));
            q2.push(StandardNormal.sample(&mut rng));
            noise.push(rng.next_u64());
        }
        let panel = McPanel { q1, q2, noise, y_bar: Vec::new(), gamma2 };
        panel.with_gamma2(model, gamma2)
    }

    /// Panel from explicit draws.
    pub fn from_draws(q1: Vec<f64>, q2: Vec<f64>, y_bar: Vec<f64>, gamma2: f64) -> Result<Self> {
        let m = q1.len();
        if q2.len() != m || y_bar.len() != m {
            return Err(Error::DimensionMismatch("panel columns differ in length".into()));
        }
        Ok(McPanel { q1, q2, noise: vec![0; m], y_bar, gamma2 })
    }

    /// Same `(Q₁, Q₂, ε̄)`, responses recomputed at a new signal strength.
    pub fn with_gamma2(&self, model: &GlmModel, gamma2: f64) -> Result<Self> {
        let gamma = gamma2.sqrt();
        let y_bar = self
            .q1
            .par_iter()
            .zip(self.noise.par_iter())
            .with_min_len(CHUNK)
            .map(|(q, e)| model.law.h(&model.link, gamma * q, *e))
            .collect::<Result<Vec<f64>>>()?;
        Ok(McPanel { q1: self.q1.clone(), q2: self.q2.clone(), noise: self.noise.clone(), y_bar, gamma2 })
    }

    pub fn len(&self) -> usize {
        self.q1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q1.is_empty()
    }

    /// Order-sensitive hash of every panel entry.
    pub fn checksum(&self) -> u64 {
        let mut h = mix64(self.gamma2.to_bits());
        for k in 0..self.len() {
            h = mix64(h ^ self.q1[k].to_bits());
            h = mix64(h ^ self.q2[k].to_bits());
            h = mix64(h ^ self.noise[k]);
            h = mix64(h ^ self.y_bar[k].to_bits());
        }
        h
    }
}

/// Panel averages of the three expectations with per-draw standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// E[1/(1 + ηg'(D))]
    pub a: f64,
    /// E[Z(Ȳ − g(D))]
    pub b: f64,
    /// E[(Ȳ − g(D))²]
    pub c: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub sd_c: f64,
    pub m: usize,
}

#[derive(Clone, Copy, Default)]
struct Sums([f64; 6]);

impl Sums {
    fn add(&mut self, a: f64, b: f64, c: f64) {
        let s = &mut self.0;
        s[0] += a;
        s[1] += b;
        s[2] += c;
        s[3] += a * a;
        s[4] += b * b;
        s[5] += c * c;
    }

    fn finish(self, m: usize) -> Moments {
        let mf = m as f64;
        let s = self.0;
        let sd = |sum: f64, sq: f64| ((sq / mf - (sum / mf).powi(2)).max(0.0) * mf / (mf - 1.0).max(1.0)).sqrt();
        Moments {
            a: s[0] / mf,
            b: s[1] / mf,
            c: s[2] / mf,
            sd_a: sd(s[0], s[3]),
            sd_b: sd(s[1], s[4]),
            sd_c: sd(s[2], s[5]),
            m,
        }
    }
}

// Chunked sums, folded in chunk order, so the result does not depend on the
// number of worker threads.
fn reduce(m: usize, term: impl Fn(usize) -> Result<(f64, f64, f64)> + Sync) -> Result<Moments> {
    let chunks: Vec<Sums> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = Sums::default();
            for k in c * CHUNK..((c + 1) * CHUNK).min(m) {
                let (a, b, cc) = term(k)?;
                s.add(a, b, cc);
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut total = Sums::default();
    for s in chunks {
        for i in 0..6 {
            total.0[i] += s.0[i];
        }
    }
    Ok(total.finish(m))
}

/// Expectations of the GLM system at `params`.
pub fn panel_moments(params: &SeParams, kappa: f64, link: &LinkSpec, panel: &McPanel) -> Result<Moments> {
    let gamma = panel.gamma2.sqrt();
    let s = (kappa * params.sigma2).sqrt();
    let SeParams { mu, eta, .. } = *params;
    reduce(panel.len(), |k| {
        let z = gamma * panel.q1[k];
        let y = panel.y_bar[k];
        let d = prox_unchecked(link, eta, mu * z + s * panel.q2[k] + eta * y)?;
        let r = y - link.g(d);
        Ok((1.0 / (1.0 + eta * link.dg(d)), z * r, r * r))
    })
}

// Expectations of the logistic-specific system, weight 2g(Z) and D = prox(−μZ + √κσQ₂),
// averaged over each draw and its negation.
fn logistic_moments(params: &SeParams, kappa: f64, link: &LinkSpec, panel: &McPanel) -> Result<Moments> {
    let gamma = panel.gamma2.sqrt();
    let s = (kappa * params.sigma2).sqrt();
    let SeParams { mu, eta, .. } = *params;
    let one = |z: f64, q: f64| -> Result<(f64, f64, f64)> {
        let w = 2.0 * link.g(z);
        let d = prox_unchecked(link, eta, -mu * z + s * q)?;
        let gd = link.g(d);
        Ok((w / (1.0 + eta * link.dg(d)), w * z * gd, w * gd * gd))
    };
    reduce(panel.len(), |k| {
        let z = gamma * panel.q1[k];
        let q = panel.q2[k];
        let (a1, b1, c1) = one(z, q)?;
        let (a2, b2, c2) = one(-z, -q)?;
        Ok((0.5 * (a1 + a2), 0.5 * (b1 + b2), 0.5 * (c1 + c2)))
    })
}

/// Outcome of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeSolution {
    pub params: SeParams,
    pub iterations: usize,
    pub panel_checksum: u64,
}

struct Driver {
    kappa: f64,
    gamma2: f64,
    lambda: f64,
    damping: f64,
    tol: f64,
    max_iter: usize,
}

impl Driver {
    fn run(&self, init: SeParams, moments: impl Fn(&SeParams) -> Result<Moments>) -> Result<(SeParams, usize)> {
        let Driver { kappa, gamma2, lambda, tol, max_iter, .. } = *self;
        let mut damping = self.damping;
        let mut cur = init;
        let mut last_deta = 0.0f64;
        let mut flips = 0;
        for k in 0..max_iter {
            let m = moments(&cur)?;
            let denom = 1.0 - m.a + 2.0 * lambda * cur.eta;
            let eta_p = kappa * cur.eta / denom;
            let mu_p = cur.mu + eta_p * (m.b - 2.0 * gamma2 * lambda * cur.mu) / (kappa * gamma2);
            let s2_p = eta_p * eta_p * m.c / (kappa * kappa);
            if !(eta_p.is_finite() && mu_p.is_finite() && s2_p.is_finite()) || !(eta_p > 0.0) {
                return Err(Error::NoConvergence(k));
            }
            if !(s2_p > 0.0) {
                return Err(Error::NegativeVariance(s2_p));
            }
            let deta = eta_p - cur.eta;
            if deta * last_deta < 0.0 {
                flips += 1;
                if flips >= 2 {
                    damping = (damping * 0.5).max(1.0 / 64.0);
                    flips = 0;
                }
            } else {
                flips = 0;
            }
            last_deta = deta;
            let next = SeParams {
                mu: cur.mu + damping * (mu_p - cur.mu),
                sigma2: cur.sigma2 + damping * (s2_p - cur.sigma2),
                eta: cur.eta + damping * (eta_p - cur.eta),
            };
            let change = cur.max_rel_change(&next);
            cur = next;
            if change < tol {
                return Ok((cur, k + 1));
            }
        }
        Err(Error::NoConvergence(max_iter))
    }
}

/// Solves the GLM system (ridge form when `prob.lambda > 0`).
pub fn solve_se(prob: &SeProblem) -> Result<SeParams> {
    Ok(solve_se_detailed(prob)?.params)
}

pub fn solve_se_detailed(prob: &SeProblem) -> Result<SeSolution> {
    prob.validate()?;
    let panel = McPanel::new(&prob.model, prob.gamma2, prob.mc_samples, prob.seed)?;
    solve_se_on_panel(prob, &panel)
}

/// Solves on a caller-provided panel (whose `gamma2` overrides `prob.gamma2`).
pub fn solve_se_on_panel(prob: &SeProblem, panel: &McPanel) -> Result<SeSolution> {
    let prob = SeProblem { gamma2: panel.gamma2, ..*prob };
    prob.validate()?;
    let checksum = panel.checksum();
    let driver = Driver {
        kappa: prob.kappa,
        gamma2: prob.gamma2,
        lambda: prob.lambda,
        damping: prob.damping,
        tol: prob.tol,
        max_iter: prob.max_iter,
    };
    let link = prob.model.link;
    let (params, iterations) =
        driver.run(prob.init.unwrap_or(prob.default_init()), |p| panel_moments(p, prob.kappa, &link, panel))?;
    Ok(SeSolution { params, iterations, panel_checksum: checksum })
}

/// Equation residuals (left minus right) with Monte-Carlo standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeResiduals {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub se1: f64,
    pub se2: f64,
    pub se3: f64,
}

impl SeResiduals {
    /// Every |r_i| within `k` standard errors plus `slack`.
    pub fn within(&self, k: f64, slack: f64) -> bool {
        self.r1.abs() <= k * (self.se1 + slack)
            && self.r2.abs() <= k * (self.se2 + slack)
            && self.r3.abs() <= k * (self.se3 + slack)
    }
}

pub fn residual_se(params: &SeParams, prob: &SeProblem) -> Result<SeResiduals> {
    prob.validate()?;
    let panel = McPanel::new(&prob.model, prob.gamma2, prob.mc_samples, prob.seed)?;
    residual_on_panel(params, prob, &panel)
}

pub fn residual_on_panel(params: &SeParams, prob: &SeProblem, panel: &McPanel) -> Result<SeResiduals> {
    let m = panel_moments(params, prob.kappa, &prob.model.link, panel)?;
    let k = prob.kappa;
    let root_m = (m.m as f64).sqrt();
    let eta2 = params.eta * params.eta;
    Ok(SeResiduals {
        r1: k * k * params.sigma2 - eta2 * m.c,
        r2: 2.0 * panel.gamma2 * prob.lambda * params.mu - m.b,
        r3: 1.0 - k + 2.0 * prob.lambda * params.eta - m.a,
        se1: eta2 * m.sd_c / root_m,
        se2: m.sd_b / root_m,
        se3: m.sd_a / root_m,
    })
}

/// Options for [`logistic_se_reference_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-6, max_iter: 2000 }
    }
}

/// Logistic-regression SE system (Bernoulli responses integrated out analytically).
pub fn logistic_se_reference(kappa: f64, gamma2: f64, mc_samples: usize, seed: u64) -> Result<SeParams> {
    logistic_se_reference_with(kappa, gamma2, mc_samples, seed, &ReferenceOptions::default())
}

pub fn logistic_se_reference_with(
    kappa: f64,
    gamma2: f64,
    mc_samples: usize,
    seed: u64,
    opts: &ReferenceOptions,
) -> Result<SeParams> {
    if !(kappa > 0.0 && kappa < 0.5) {
        return Err(Error::InvalidArgument(format!("reference system needs kappa in (0, 0.5), got {kappa}")));
    }
    if !gamma2.is_finite() || gamma2 < 0.0 {
        return Err(Error::InvalidArgument(format!("gamma2 must be positive, got {gamma2}")));
    }
    if gamma2 < MIN_GAMMA2 {
        return Err(Error::DegenerateSignal);
    }
    let model = GlmModel::logistic();
    let panel = McPanel::new(&model, gamma2, mc_samples.div_ceil(2), seed)?;
    let driver =
        Driver { kappa, gamma2, lambda: 0.0, damping: opts.damping, tol: opts.tol, max_iter: opts.max_iter };
    let init = SeParams { mu: 1.0, sigma2: kappa * gamma2 + 1.0, eta: 1.0 };
    let (params, _) = driver.run(init, |p| logistic_moments(p, kappa, &model.link, &panel))?;
    Ok(params)
}

/// Solutions for several panel seeds, flagged when they disagree beyond Monte-Carlo jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeedReport {
    pub seeds: Vec<u64>,
    pub solutions: Vec<SeParams>,
    /// Largest pairwise componentwise relative difference.
    pub spread: f64,
    pub consistent: bool,
}

pub fn solve_se_seeds(prob: &SeProblem, seeds: &[u64], rel_jitter: f64) -> Result<MultiSeedReport> {
    let solutions = seeds
        .iter()
        .map(|&seed| solve_se(&SeProblem { seed, ..*prob }))
        .collect::<Result<Vec<_>>>()?;
    let mut spread: f64 = 0.0;
    for i in 0..solutions.len() {
        for j in 0..i {
            spread = spread.max(solutions[i].rel_diff(&solutions[j]));
        }
    }
    Ok(MultiSeedReport { seeds: seeds.to_vec(), solutions, spread, consistent: spread <= rel_jitter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::LinkFamily;
    use crate::response::ResponseLaw;

    fn linear_model(sigma_e2: f64) -> GlmModel {
        GlmModel::new(LinkSpec::of(LinkFamily::Linear).unwrap(), ResponseLaw::GaussianAdditive { sigma_e2 }).unwrap()
    }

    #[test]
    fn hand_computed_panel() {
        let panel =
            McPanel::from_draws(vec![1.0, -1.0, 0.5, 0.0], vec![0.0, 1.0, -1.0, 2.0], vec![2.0, -1.0, 0.0, 1.0], 4.0)
                .unwrap();
        let prob = SeProblem::new(0.25, 4.0, linear_model(1.0));
        let params = SeParams { mu: 1.0, sigma2: 1.0, eta: 1.0 };
        let m = panel_moments(&params, 0.25, &prob.model.link, &panel).unwrap();
        assert!((m.a - 0.5).abs() < 1e-15);
        assert!((m.b + 0.1875).abs() < 1e-15);
        assert!((m.c - 0.03125).abs() < 1e-15);
        let r = residual_on_panel(&params, &prob, &panel).unwrap();
        assert!((r.r1 - 0.03125).abs() < 1e-15);
        assert!((r.r2 - 0.1875).abs() < 1e-15);
        assert!((r.r3 - 0.25).abs() < 1e-15);
        assert!(McPanel::from_draws(vec![1.0], vec![], vec![1.0], 1.0).is_err());
    }

    #[test]
    fn linear_least_squares_is_exact() {
        // μ = 1, σ² = σ_e²/(1 − κ), η = κ/(1 − κ)
        let (kappa, sigma_e2) = (0.3, 0.5);
        let prob = SeProblem { mc_samples: 200_000, seed: 3, ..SeProblem::new(kappa, 2.0, linear_model(sigma_e2)) };
        let s = solve_se(&prob).unwrap();
        assert!((s.eta - kappa / (1.0 - kappa)).abs() < 1e-5, "{s:?}");
        assert!((s.mu - 1.0).abs() < 0.01, "{s:?}");
        assert!((s.sigma2 - sigma_e2 / (1.0 - kappa)).abs() < 0.02 * s.sigma2, "{s:?}");
    }

    #[test]
    fn linear_ridge_closed_form() {
        let (kappa, gamma2, sigma_e2, lambda): (f64, f64, f64, f64) = (0.8, 1.5, 0.5, 0.2);
        // 1 − κ + 2λη = 1/(1 + η)
        let (a, b, c) = (2.0 * lambda, 1.0 - kappa + 2.0 * lambda, -kappa);
        let eta = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        let mu = 1.0 / (1.0 + 2.0 * lambda * (1.0 + eta));
        let sigma2 = eta * eta * (sigma_e2 + (1.0 - mu).powi(2) * gamma2)
            / (kappa * kappa * (1.0 + eta).powi(2) - eta * eta * kappa);
        let prob = SeProblem { lambda, mc_samples: 200_000, seed: 8, ..SeProblem::new(kappa, gamma2, linear_model(sigma_e2)) };
        let s = solve_se(&prob).unwrap();
        assert!((s.eta - eta).abs() < 1e-5 * eta, "{s:?} vs eta {eta}");
        assert!((s.mu - mu).abs() < 0.01 * mu, "{s:?} vs mu {mu}");
        assert!((s.sigma2 - sigma2).abs() < 0.02 * sigma2, "{s:?} vs sigma2 {sigma2}");
    }

    #[test]
    fn vanishing_ridge_matches_plain() {
        let base = SeProblem { mc_samples: 50_000, seed: 2, tol: 1e-9, ..SeProblem::new(0.1, 1.0, GlmModel::logistic()) };
        let plain = solve_se(&base).unwrap();
        let ridge = solve_se(&SeProblem { lambda: 1e-8, ..base }).unwrap();
        assert!(plain.rel_diff(&ridge) < 1e-5, "{plain:?} vs {ridge:?}");
    }

    #[test]
    fn fixed_point_residuals_are_within_monte_carlo_error() {
        let prob = SeProblem { mc_samples: 100_000, seed: 4, tol: 1e-9, ..SeProblem::new(0.2, 1.0, GlmModel::poisson_clipped_exp()) };
        let s = solve_se(&prob).unwrap();
        let own = residual_se(&s, &prob).unwrap();
        assert!(own.r1.abs() < 1e-6 && own.r2.abs() < 1e-6 && own.r3.abs() < 1e-6, "{own:?}");
        let fresh = residual_se(&s, &SeProblem { seed: 99, ..prob }).unwrap();
        assert!(fresh.within(5.0, 0.0), "{fresh:?}");
    }

    #[test]
    fn solves_are_reproducible() {
        let prob = SeProblem { mc_samples: 30_000, seed: 6, ..SeProblem::new(0.2, 1.0, GlmModel::poisson_clipped_exp()) };
        let a = solve_se_detailed(&prob).unwrap();
        let b = solve_se_detailed(&prob).unwrap();
        assert_eq!(a, b);
        let other = solve_se_detailed(&SeProblem { seed: 7, ..prob }).unwrap();
        assert_ne!(a.panel_checksum, other.panel_checksum);
        let report = solve_se_seeds(&prob, &[1, 2, 3], 0.1).unwrap();
        assert!(report.consistent, "{report:?}");
        assert_eq!(report.solutions.len(), 3);
    }

    #[test]
    fn panel_can_be_rescaled() {
        let model = GlmModel::poisson_clipped_exp();
        let p1 = McPanel::new(&model, 1.0, 1000, 5).unwrap();
        let p4 = p1.with_gamma2(&model, 4.0).unwrap();
        assert_eq!(p1.q1, p4.q1);
        assert_eq!(p4, McPanel::new(&model, 4.0, 1000, 5).unwrap());
    }

    #[test]
    fn rejects_bad_problems() {
        let ok = SeProblem::new(0.2, 1.0, GlmModel::logistic());
        assert!(ok.validate().is_ok());
        assert!(SeProblem { kappa: 1.2, ..ok }.validate().is_err());
        assert!(SeProblem { kappa: 1.2, lambda: 0.1, ..ok }.validate().is_ok());
        assert!(matches!(SeProblem { gamma2: 0.0, ..ok }.validate(), Err(Error::DegenerateSignal)));
        assert!(SeProblem { damping: 0.0, ..ok }.validate().is_err());
        assert!(SeProblem { mc_samples: 0, ..ok }.validate().is_err());
        let square = GlmModel::square(0.1);
        assert!(matches!(SeProblem::new(0.2, 1.0, square).validate(), Err(Error::NonMonotoneLink)));
        assert!(logistic_se_reference(0.6, 1.0, 100, 1).is_err());
        assert!(matches!(logistic_se_reference(0.1, 0.0, 100, 1), Err(Error::DegenerateSignal)));
    }

    #[test]
    fn logistic_reference_agrees_with_the_general_system() {
        let g = solve_se(&SeProblem { mc_samples: 400_000, seed: 10, ..SeProblem::new(0.1, 1.0, GlmModel::logistic()) }).unwrap();
        let r = logistic_se_reference(0.1, 1.0, 400_000, 11).unwrap();
        assert!(g.rel_diff(&r) < 0.03, "{g:?} vs {r:?}");
    }
}
