//! Estimation of the SE inputs from data: γ̂², σ̂_e² and τ̂_j².

use nalgebra::Cholesky;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GlmModel};
use crate::error::{Error, Result};
use crate::linalg::{gram, inverse_diagonal};
use crate::link::LinkSpec;
use crate::rng::stream_rng;

const STREAM_CURVE: u64 = 0xC0;
const CHUNK: usize = 16_384;
const MAX_DOUBLINGS: usize = 40;

/// Fixed standard-normal panel for `ς ↦ m⁻¹ Σ g(ς z_k)`.
///
/// The panel holds `m/2` draws and their negations, so the curve equals the
/// panel mean of the even part of `g` and is exactly monotone in `ς` whenever
/// that even part is.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurve {
    half: Vec<f64>,
}

impl MeanCurve {
    pub fn new(m: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, STREAM_CURVE, 0);
        let half = (0..m.div_ceil(2).max(1)).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self { half }
    }

    /// Number of panel points (always even).
    pub fn len(&self) -> usize {
        2 * self.half.len()
    }

    pub fn is_empty(&self) -> bool {
        self.half.is_empty()
    }

    fn mean_of(&self, f: impl Fn(f64) -> f64 + Sync) -> f64 {
        let parts: Vec<f64> = self
            .half
            .par_chunks(CHUNK)
            .map(|c| c.iter().map(|&z| f(z) + f(-z)).sum::<f64>())
            .collect();
        parts.iter().sum::<f64>() / self.len() as f64
    }

    /// `Ê[g(Z_ς)]`.
    pub fn eval(&self, link: &LinkSpec, varsigma: f64) -> f64 {
        if varsigma == 0.0 {
            return link.g(0.0);
        }
        self.mean_of(|z| link.g(varsigma * z))
    }

    /// `d/dς Ê[g(Z_ς)] = Ê[z g'(ς z)]`.
    pub fn slope(&self, link: &LinkSpec, varsigma: f64) -> f64 {
        self.mean_of(|z| z * link.dg(varsigma * z))
    }

    /// `Ê[g(Z_ς)²]`.
    pub fn second_moment(&self, link: &LinkSpec, varsigma: f64) -> f64 {
        self.mean_of(|z| link.g(varsigma * z).powi(2))
    }

    /// Monte-Carlo standard error of [`eval`](Self::eval) at `ς`.
    pub fn std_error(&self, link: &LinkSpec, varsigma: f64) -> f64 {
        let mean = self.eval(link, varsigma);
        let var = self.mean_of(|z| (link.g(varsigma * z) - mean).powi(2));
        (var / self.len() as f64).sqrt()
    }

    /// Root `ς ≥ 0` of `eval(ς) = target`, bracketed from `[0, bracket_hi]`.
    pub fn solve(&self, link: &LinkSpec, target: f64, bracket_hi: f64) -> Result<f64> {
        if !link.even_part_strictly_monotone {
            return Err(Error::OddLink);
        }
        if !target.is_finite() {
            return Err(Error::NoBracket(target));
        }
        let f = |s: f64| self.eval(link, s) - target;
        let f0 = f(0.0);
        if f0 == 0.0 {
            return Err(Error::DegenerateSignal);
        }
        let mut hi = if bracket_hi > 0.0 && bracket_hi.is_finite() { bracket_hi } else { 1.0 };
        let mut fhi = f(hi);
        let mut doublings = 0;
        let mut lo = 0.0;
        while fhi.is_finite() && fhi.signum() == f0.signum() {
            if doublings == MAX_DOUBLINGS {
                return Err(Error::NoBracket(target));
            }
            lo = hi;
            hi *= 2.0;
            fhi = f(hi);
            doublings += 1;
        }
        if !fhi.is_finite() {
            return Err(Error::NoBracket(target));
        }
        // orient so that flo < 0 < fhi
        let sign = if f0 < 0.0 { 1.0 } else { -1.0 };
        let tol = 1e-10 * target.abs().max(1.0);
        let mut s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fs = f(s);
            if fs.abs() <= tol {
                return Ok(s);
            }
            if sign * fs < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let d = self.slope(link, s);
            let mut next = s - fs / d;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if hi - lo <= 1e-15 * hi {
                return Ok(next);
            }
            s = next;
        }
        Ok(s)
    }
}

/// γ̂²: the squared scale at which the simulated mean of `g` equals `y_mean`.
pub fn estimate_gamma2(y_mean: f64, link: &LinkSpec, m: usize, seed: u64, bracket_hi: f64) -> Result<f64> {
    if !link.even_part_strictly_monotone {
        return Err(Error::OddLink);
    }
    let s = MeanCurve::new(m, seed).solve(link, y_mean, bracket_hi)?;
    Ok(s * s)
}

/// Split used by [`estimate_sigma_e2`]: `I = 0..⌊n/2⌋`.
pub fn sigma_split(n: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    (0..n / 2, n / 2..n)
}

/// σ̂_e² from the first half of the responses, with γ̂ computed on the second half.
pub fn estimate_sigma_e2(data: &Dataset, link: &LinkSpec, m: usize, seed: u64) -> Result<f64> {
    estimate_sigma_e2_with(&MeanCurve::new(m, seed), data, link)
}

/// [`estimate_sigma_e2`] on a prebuilt panel.
pub fn estimate_sigma_e2_with(curve: &MeanCurve, data: &Dataset, link: &LinkSpec) -> Result<f64> {
    if !link.even_part_strictly_monotone {
        return Err(Error::OddLink);
    }
    let n = data.n();
    if n < 20 {
        return Err(Error::InsufficientData(format!("need n >= 20 for the split, got {n}")));
    }
    let (first, second) = sigma_split(n);
    let y_mean_c = data.y.as_slice()[second.clone()].iter().sum::<f64>() / second.len() as f64;
    let gamma = curve.solve(link, y_mean_c, 1.0)?;
    let y2_mean = data.y.as_slice()[first.clone()].iter().map(|y| y * y).sum::<f64>() / first.len() as f64;
    Ok((y2_mean - curve.second_moment(link, gamma)).max(0.0))
}

/// τ̂_j² = RSS_j/(n − p + 1) with RSS_j = 1/[(XᵀX)⁻¹]_jj.
pub fn estimate_tau2(data: &Dataset) -> Result<Vec<f64>> {
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return Err(Error::RankDeficient);
    }
    let chol = Cholesky::new(gram(&data.x)).ok_or(Error::RankDeficient)?;
    let diag = inverse_diagonal(&chol);
    let denom = (n - p + 1) as f64;
    diag.iter()
        .enumerate()
        .map(|(j, d)| {
            let rss = 1.0 / d;
            let v = rss / denom;
            if v.is_finite() && rss > 1e-10 * data.x.column(j).norm_squared() {
                Ok(v)
            } else {
                Err(Error::RankDeficient)
            }
        })
        .collect()
}

/// Calibrated SE inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperEstimates {
    pub gamma2_hat: f64,
    pub sigma_e2_hat: Option<f64>,
    pub tau2_hat: Vec<f64>,
    pub mc_samples_used: usize,
    pub split_spec: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrateOptions {
    pub mc_samples: usize,
    pub seed: u64,
    pub bracket_hi: f64,
}

impl CalibrateOptions {
    pub fn new(seed: u64) -> Self {
        Self { mc_samples: 1_000_000, seed, bracket_hi: 1.0 }
    }
}

/// γ̂² from all responses, σ̂_e² for Gaussian responses, τ̂² from the design.
pub fn calibrate(data: &Dataset, model: &GlmModel, opts: &CalibrateOptions) -> Result<HyperEstimates> {
    let curve = MeanCurve::new(opts.mc_samples, opts.seed);
    calibrate_with(&curve, data, model, opts.bracket_hi)
}

pub fn calibrate_with(curve: &MeanCurve, data: &Dataset, model: &GlmModel, bracket_hi: f64) -> Result<HyperEstimates> {
    if !model.link.even_part_strictly_monotone {
        return Err(Error::OddLink);
    }
    let s = curve.solve(&model.link, data.y_mean(), bracket_hi)?;
    let sigma_e2_hat = match model.law.sigma_e2() {
        Some(_) => Some(estimate_sigma_e2_with(curve, data, &model.link)?),
        None => None,
    };
    let n = data.n();
    Ok(HyperEstimates {
        gamma2_hat: s * s,
        sigma_e2_hat,
        tau2_hat: estimate_tau2(data)?,
        mc_samples_used: curve.len(),
        split_spec: format!("I = rows 0..{} (first half), complement {}..{}", n / 2, n / 2, n),
    })
}
