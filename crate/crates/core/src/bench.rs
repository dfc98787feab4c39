//! Seeded simulation experiments and the Kolmogorov–Smirnov normality check.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{estimate_sigma_e2_with, estimate_tau2, MeanCurve};
use crate::covariance::CovarianceModel;
use crate::data::{sample_dataset, Dataset, GlmModel, SyntheticConfig};
use crate::error::{Error, Result};
use crate::fit::{empirical_se, fit_surrogate, FitOptions};
use crate::inference::{classical_ci, corrected_ci, normal_cdf, pivot_stats};
use crate::rng::derive_seed;
use crate::se::{solve_se_detailed, solve_se_on_panel, McPanel, SeParams, SeProblem};

const STREAM_REP: u64 = 0xBE;
const STREAM_CURVE: u64 = 0xCC;
const STREAM_SE: u64 = 0x5E;

/// One-sample Kolmogorov–Smirnov test against N(0,1): `(D_n, asymptotic p-value)`.
pub fn ks_statistic(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if n < 20 {
        return Err(Error::TooFewSamples { needed: 20, got: n });
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("sample contains NaN".into()));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let root_n = nf.sqrt();
    Ok((d, kolmogorov_sf((root_n + 0.12 + 0.11 / root_n) * d)))
}

/// `P(K > x)` for the Kolmogorov distribution.
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // P(K ≤ x) = √(2π)/x Σ exp(−(2k−1)²π²/(8x²))
        let c = -std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let cdf: f64 = (1..=20).map(|k| ((2 * k - 1) as f64).powi(2) * c).map(f64::exp).sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / x;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let sf: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * x * x).exp()
            })
            .sum();
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioTag {
    GammaRecovery,
    SigmaE2Recovery,
    CoverageComparison,
    SeCurves,
    ErrorLimits,
    PivotNormality,
}

impl ScenarioTag {
    /// Scenario-specific columns appended after the common ones.
    pub fn extra_columns(&self) -> &'static [&'static str] {
        match self {
            ScenarioTag::GammaRecovery => &["gamma_true"],
            ScenarioTag::SigmaE2Recovery => &["sigma_e2_true"],
            ScenarioTag::CoverageComparison => {
                &["classical_coverage", "coverage_small_beta", "coverage_large_beta", "mu_hat_mean", "sigma2_hat_mean"]
            }
            ScenarioTag::SeCurves => &["sigma2_mean", "sigma2_std", "eta_mean", "eta_std"],
            ScenarioTag::ErrorLimits => &[
                "se_mu",
                "se_sigma2",
                "se_eta",
                "cosine_mean",
                "mse_mean",
                "mse_pred",
                "mu_n_mean",
                "sigma2_n_mean",
            ],
            ScenarioTag::PivotNormality => &["ks_stat", "ks_p_value"],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioTag::GammaRecovery => "gamma_recovery",
            ScenarioTag::SigmaE2Recovery => "sigma_e2_recovery",
            ScenarioTag::CoverageComparison => "coverage_comparison",
            ScenarioTag::SeCurves => "se_curves",
            ScenarioTag::ErrorLimits => "error_limits",
            ScenarioTag::PivotNormality => "pivot_normality",
        }
    }
}

impl std::str::FromStr for ScenarioTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tag = match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gamma_recovery" | "gamma" => ScenarioTag::GammaRecovery,
            "sigma_e2_recovery" | "sigma_e2" => ScenarioTag::SigmaE2Recovery,
            "coverage_comparison" | "coverage" => ScenarioTag::CoverageComparison,
            "se_curves" => ScenarioTag::SeCurves,
            "error_limits" => ScenarioTag::ErrorLimits,
            "pivot_normality" | "pivot" => ScenarioTag::PivotNormality,
            _ => return Err(Error::Parse(format!("unknown scenario `{s}`"))),
        };
        Ok(tag)
    }
}

/// One point of an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n: usize,
    pub kappa: f64,
    pub gamma2: f64,
    pub model: GlmModel,
    pub alpha: f64,
}

impl GridCell {
    pub fn p(&self) -> usize {
        (self.kappa * self.n as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: ScenarioTag,
    pub grid: Vec<GridCell>,
    pub replications: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub covariance: CovarianceModel,
    /// Panel size of the simulated-mean curve used for γ̂².
    pub curve_samples: usize,
    /// Panel size of each SE solve.
    pub se_samples: usize,
    /// Coordinate tracked by `PivotNormality`.
    pub pivot_coordinate: usize,
    /// Wall-clock timings make the report non-reproducible, so they are opt-in.
    pub record_wall_time: bool,
}

impl ExperimentSpec {
    pub fn new(scenario: ScenarioTag, grid: Vec<GridCell>, replications: usize, seed: u64) -> Self {
        Self {
            scenario,
            grid,
            replications,
            seed,
            output_path: None,
            covariance: CovarianceModel::Identity,
            curve_samples: 1_000_000,
            se_samples: 200_000,
            pivot_coordinate: 0,
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("experiment grid is empty".into()));
        }
        if self.curve_samples == 0 || self.se_samples == 0 {
            return Err(Error::InvalidArgument("panel sizes must be positive".into()));
        }
        for c in &self.grid {
            let p = c.p();
            if c.n == 0 || p == 0 {
                return Err(Error::InvalidArgument(format!("grid cell n={} kappa={} has no columns", c.n, c.kappa)));
            }
            if !(c.gamma2 > 0.0 && c.gamma2.is_finite()) {
                return Err(Error::InvalidArgument(format!("gamma2 must be positive, got {}", c.gamma2)));
            }
            if !(c.alpha > 0.0 && c.alpha < 1.0) {
                return Err(Error::OutOfRange(c.alpha));
            }
            if self.scenario == ScenarioTag::PivotNormality && self.pivot_coordinate >= p {
                return Err(Error::InvalidArgument(format!(
                    "pivot coordinate {} out of range for p = {p}",
                    self.pivot_coordinate
                )));
            }
        }
        Ok(())
    }
}

/// Summary of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub cell: usize,
    pub n: usize,
    pub p: usize,
    pub kappa: f64,
    pub gamma2: f64,
    pub model: String,
    pub alpha: f64,
    pub replications: usize,
    pub completed: usize,
    pub mean: f64,
    pub std: f64,
    pub coverage: Option<f64>,
    pub wall_time: Option<f64>,
    /// Values for [`ScenarioTag::extra_columns`], in order.
    pub extras: Vec<f64>,
    /// Set when the whole cell failed or no replication completed.
    pub error: Option<String>,
}

impl ReportRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    pub fn extra(&self, scenario: ScenarioTag, column: &str) -> Option<f64> {
        scenario.extra_columns().iter().position(|c| *c == column).map(|i| self.extras[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: ScenarioTag,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn columns(&self) -> Vec<&'static str> {
        let mut cols = vec![
            "cell",
            "n",
            "p",
            "kappa",
            "gamma2",
            "model",
            "alpha",
            "replications",
            "completed",
            "mean",
            "std",
            "coverage",
            "wall_time",
            "error",
        ];
        cols.extend_from_slice(self.scenario.extra_columns());
        cols
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.columns())?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![
                r.cell.to_string(),
                r.n.to_string(),
                r.p.to_string(),
                r.kappa.to_string(),
                r.gamma2.to_string(),
                r.model.clone(),
                r.alpha.to_string(),
                r.replications.to_string(),
                r.completed.to_string(),
                r.mean.to_string(),
                r.std.to_string(),
                opt(r.coverage),
                opt(r.wall_time),
                r.error.clone().unwrap_or_default(),
            ];
            rec.extend(r.extras.iter().map(|v| v.to_string()));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every grid cell; failures are recorded per replication and per cell.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let needs_curve = matches!(
        spec.scenario,
        ScenarioTag::GammaRecovery | ScenarioTag::SigmaE2Recovery | ScenarioTag::CoverageComparison
    );
    let curve = needs_curve.then(|| MeanCurve::new(spec.curve_samples, derive_seed(spec.seed, STREAM_CURVE, 0)));
    let rows = spec
        .grid
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let start = Instant::now();
            let mut row = run_cell(spec, i, cell, curve.as_ref());
            if spec.record_wall_time {
                row.wall_time = Some(start.elapsed().as_secs_f64());
            }
            row
        })
        .collect();
    let report = ExperimentReport { scenario: spec.scenario, seed: spec.seed, rows };
    if let Some(path) = &spec.output_path {
        report.write_csv(path)?;
    }
    Ok(report)
}

fn empty_row(spec: &ExperimentSpec, i: usize, cell: &GridCell) -> ReportRow {
    ReportRow {
        cell: i,
        n: cell.n,
        p: cell.p(),
        kappa: cell.kappa,
        gamma2: cell.gamma2,
        model: cell.model.name(),
        alpha: cell.alpha,
        replications: spec.replications,
        completed: 0,
        mean: f64::NAN,
        std: f64::NAN,
        coverage: None,
        wall_time: None,
        extras: vec![f64::NAN; spec.scenario.extra_columns().len()],
        error: None,
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn mean(v: &[f64]) -> f64 {
    mean_std(v).0
}

fn column(outs: &[Vec<f64>], k: usize) -> Vec<f64> {
    outs.iter().map(|o| o[k]).collect()
}

// Per-replication outcomes in grid order; errors are dropped and counted.
fn replicate(
    spec: &ExperimentSpec,
    i: usize,
    cell: &GridCell,
    f: impl Fn(&Dataset) -> Result<Vec<f64>> + Sync,
) -> Vec<Vec<f64>> {
    (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(spec.seed, STREAM_REP, ((i as u64) << 32) | r as u64);
            let config = SyntheticConfig::new(cell.n, cell.p(), cell.gamma2, seed);
            let data = sample_dataset(&config, &cell.model, &spec.covariance)?;
            f(&data)
        })
        .collect::<Vec<Result<Vec<f64>>>>()
        .into_iter()
        .filter_map(|r| r.ok())
        .collect()
}

fn run_cell(spec: &ExperimentSpec, i: usize, cell: &GridCell, curve: Option<&MeanCurve>) -> ReportRow {
    let mut row = empty_row(spec, i, cell);
    let filled = match spec.scenario {
        ScenarioTag::GammaRecovery => gamma_cell(spec, i, cell, curve.expect("curve"), &mut row),
        ScenarioTag::SigmaE2Recovery => sigma_cell(spec, i, cell, curve.expect("curve"), &mut row),
        ScenarioTag::CoverageComparison => coverage_cell(spec, i, cell, curve.expect("curve"), &mut row),
        ScenarioTag::SeCurves => se_curve_cell(spec, i, cell, &mut row),
        ScenarioTag::ErrorLimits => error_limit_cell(spec, i, cell, &mut row),
        ScenarioTag::PivotNormality => pivot_cell(spec, i, cell, &mut row),
    };
    match filled {
        Err(e) => row.error = Some(e.to_string()),
        Ok(()) if row.completed == 0 => row.error = Some("no replication completed".into()),
        Ok(()) => {}
    }
    row
}

fn cell_se(spec: &ExperimentSpec, i: usize, cell: &GridCell) -> Result<(SeProblem, SeParams)> {
    let prob = SeProblem {
        mc_samples: spec.se_samples,
        seed: derive_seed(spec.seed, STREAM_SE, i as u64),
        ..SeProblem::new(cell.kappa, cell.gamma2, cell.model)
    };
    let sol = solve_se_detailed(&prob)?;
    Ok((prob, sol.params))
}

fn gamma_cell(spec: &ExperimentSpec, i: usize, cell: &GridCell, curve: &MeanCurve, row: &mut ReportRow) -> Result<()> {
    let outs = replicate(spec, i, cell, |d| Ok(vec![curve.solve(&cell.model.link, d.y_mean(), 1.0)?]));
    let (m, s) = mean_std(&column(&outs, 0));
    row.completed = outs.len();
    row.mean = m;
    row.std = s;
    row.extras = vec![cell.gamma2.sqrt()];
    Ok(())
}

fn sigma_cell(spec: &ExperimentSpec, i: usize, cell: &GridCell, curve: &MeanCurve, row: &mut ReportRow) -> Result<()> {
    let truth = cell
        .model
        .law
        .sigma_e2()
        .ok_or_else(|| Error::InvalidArgument("sigma_e2 recovery needs Gaussian additive responses".into()))?;
    let outs = replicate(spec, i, cell, |d| Ok(vec![estimate_sigma_e2_with(curve, d, &cell.model.link)?]));
    let (m, s) = mean_std(&column(&outs, 0));
    row.completed = outs.len();
    row.mean = m;
    row.std = s;
    row.extras = vec![truth];
    Ok(())
}

// Per replication: [proposed coverage, classical coverage, small-|β| coverage, large-|β| coverage, μ̂, σ̂²].
fn coverage_cell(
    spec: &ExperimentSpec,
    i: usize,
    cell: &GridCell,
    curve: &MeanCurve,
    row: &mut ReportRow,
) -> Result<()> {
    // the SE at the true γ² anchors every replication: same panel draws, warm start
    let (prob, anchor) = cell_se(spec, i, cell)?;
    let base = McPanel::new(&cell.model, cell.gamma2, prob.mc_samples, prob.seed)?;
    let fit_opts = FitOptions::default();
    let outs = replicate(spec, i, cell, |d| {
        let truth = d.truth()?.as_slice();
        let s = curve.solve(&cell.model.link, d.y_mean(), 1.0)?;
        let tau2 = estimate_tau2(d)?;
        let fit = fit_surrogate(d, &cell.model.link, &fit_opts)?;
        if fit.diverged {
            return Err(Error::Diverged);
        }
        let panel = base.with_gamma2(&cell.model, s * s)?;
        let se = solve_se_on_panel(&SeProblem { init: Some(anchor), ..prob }, &panel)?.params;
        let beta_hat = fit.beta_hat.as_slice();
        let proposed = corrected_ci(beta_hat, &se, &tau2, cell.alpha, d.n())?;
        let classical = classical_ci(d, &cell.model.link, beta_hat, cell.alpha)?;
        let mut mags: Vec<f64> = truth.iter().map(|b| b.abs()).collect();
        mags.sort_by(f64::total_cmp);
        let median = mags[mags.len() / 2];
        let (mut small, mut n_small, mut large, mut n_large) = (0usize, 0usize, 0usize, 0usize);
        for (r, b) in proposed.rows.iter().zip(truth) {
            let hit = r.contains(*b) as usize;
            if b.abs() < median {
                small += hit;
                n_small += 1;
            } else {
                large += hit;
                n_large += 1;
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
        Ok(vec![
            proposed.coverage(truth)?,
            classical.coverage(truth)?,
            ratio(small, n_small),
            ratio(large, n_large),
            se.mu,
            se.sigma2,
        ])
    });
    let (m, s) = mean_std(&column(&outs, 0));
    row.completed = outs.len();
    row.mean = m;
    row.std = s;
    row.coverage = Some(m);
    row.extras = vec![
        mean(&column(&outs, 1)),
        mean(&column(&outs, 2)),
        mean(&column(&outs, 3)),
        mean(&column(&outs, 4)),
        mean(&column(&outs, 5)),
    ];
    Ok(())
}

fn se_curve_cell(spec: &ExperimentSpec, i: usize, cell: &GridCell, row: &mut ReportRow) -> Result<()> {
    let sols: Vec<SeParams> = (0..spec.replications)
        .map(|r| {
            let prob = SeProblem {
                mc_samples: spec.se_samples,
                seed: derive_seed(spec.seed, STREAM_SE, ((i as u64) << 32) | r as u64),
                ..SeProblem::new(cell.kappa, cell.gamma2, cell.model)
            };
            solve_se_detailed(&prob).map(|s| s.params)
        })
        .filter_map(|r| r.ok())
        .collect();
    let mus: Vec<f64> = sols.iter().map(|s| s.mu).collect();
    let s2: Vec<f64> = sols.iter().map(|s| s.sigma2).collect();
    let etas: Vec<f64> = sols.iter().map(|s| s.eta).collect();
    let (m, s) = mean_std(&mus);
    let (s2m, s2s) = mean_std(&s2);
    let (em, es) = mean_std(&etas);
    row.completed = sols.len();
    row.mean = m;
    row.std = s;
    row.extras = vec![s2m, s2s, em, es];
    Ok(())
}

// Per replication: [corrected MSE n·p⁻¹‖θ̂ − μθ‖², cosine ratio, p⁻¹‖β̂ − β‖², μ_n, σ_n²].
fn error_limit_cell(spec: &ExperimentSpec, i: usize, cell: &GridCell, row: &mut ReportRow) -> Result<()> {
    let (_, se) = cell_se(spec, i, cell)?;
    let fit_opts = FitOptions::default();
    let outs = replicate(spec, i, cell, |d| {
        let fit = fit_surrogate(d, &cell.model.link, &fit_opts)?;
        if fit.diverged || !fit.converged {
            return Err(Error::NoConvergence(fit.iterations));
        }
        let beta = d.truth()?;
        let theta = DVector::from_vec(spec.covariance.lt_mul(beta.as_slice())?);
        let theta_hat = DVector::from_vec(spec.covariance.lt_mul(fit.beta_hat.as_slice())?);
        let (n, p) = (d.n() as f64, d.p() as f64);
        let corrected = n / p * (&theta_hat - &theta * se.mu).norm_squared();
        let cosine = theta_hat.dot(&theta) / theta.norm_squared();
        let mse = (&fit.beta_hat - beta).norm_squared() / p;
        let (mu_n, s2_n) = empirical_se(&fit.beta_hat, Some(beta), &spec.covariance, d.n())?;
        Ok(vec![corrected, cosine, mse, mu_n, s2_n])
    });
    let (m, s) = mean_std(&column(&outs, 0));
    row.completed = outs.len();
    row.mean = m;
    row.std = s;
    // p⁻¹‖β̂ − β‖² ≈ p⁻¹((μ − 1)²γ² + κσ²) for identity covariance
    let p = cell.p() as f64;
    let mse_pred = ((se.mu - 1.0).powi(2) * cell.gamma2 + cell.kappa * se.sigma2) / p;
    row.extras = vec![
        se.mu,
        se.sigma2,
        se.eta,
        mean(&column(&outs, 1)),
        mean(&column(&outs, 2)),
        mse_pred,
        mean(&column(&outs, 3)),
        mean(&column(&outs, 4)),
    ];
    Ok(())
}

fn pivot_cell(spec: &ExperimentSpec, i: usize, cell: &GridCell, row: &mut ReportRow) -> Result<()> {
    let (_, se) = cell_se(spec, i, cell)?;
    let j = spec.pivot_coordinate;
    let fit_opts = FitOptions::default();
    let outs = replicate(spec, i, cell, |d| {
        let fit = fit_surrogate(d, &cell.model.link, &fit_opts)?;
        if fit.diverged || !fit.converged {
            return Err(Error::NoConvergence(fit.iterations));
        }
        let tau2 = estimate_tau2(d)?;
        let piv = pivot_stats(fit.beta_hat.as_slice(), Some(d.truth()?.as_slice()), &se, &tau2, d.n())?;
        Ok(vec![piv.values[j]])
    });
    let values = column(&outs, 0);
    let (m, s) = mean_std(&values);
    row.completed = outs.len();
    row.mean = m;
    row.std = s;
    let (stat, p) = ks_statistic(&values)?;
    row.extras = vec![stat, p];
    Ok(())
}
