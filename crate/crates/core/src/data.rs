//! GLM models, synthetic data generation and CSV I/O.

use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::link::{LinkFamily, LinkSpec};
use crate::response::ResponseLaw;
use crate::rng::{derive_seed, stream_rng};

const STREAM_BETA: u64 = 1;
const STREAM_X: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Inverse link plus response law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    pub link: LinkSpec,
    pub law: ResponseLaw,
}

impl GlmModel {
    pub fn new(link: LinkSpec, law: ResponseLaw) -> Result<Self> {
        law.validate()?;
        Ok(Self { link, law })
    }

    /// Poisson counts with the exponential link clipped at 50.
    pub fn poisson_clipped_exp() -> Self {
        Self { link: LinkSpec::clipped_exp(50.0).unwrap(), law: ResponseLaw::Poisson }
    }

    pub fn logistic() -> Self {
        Self { link: LinkSpec::logistic(), law: ResponseLaw::Bernoulli }
    }

    pub fn piecewise(sigma_e2: f64) -> Self {
        Self { link: LinkSpec::piecewise(5.0, 0.1).unwrap(), law: ResponseLaw::GaussianAdditive { sigma_e2 } }
    }

    pub fn square(sigma_e2: f64) -> Self {
        Self {
            link: LinkSpec::of(LinkFamily::Square).unwrap(),
            law: ResponseLaw::GaussianAdditive { sigma_e2 },
        }
    }

    pub fn name(&self) -> String {
        format!("{}/{}", self.law.name(), self.link.name())
    }
}

impl FromStr for GlmModel {
    type Err = Error;

    /// Preset names (`poisson-clippedexp`, `poisson-exp`, `logistic`, `cloglog`,
    /// `piecewise`, `square`, `linear`, `exponential`) or `law/link`.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        if let Some((law, link)) = key.split_once('/') {
            return GlmModel::new(link.parse()?, law.parse()?);
        }
        Ok(match key.as_str() {
            "poisson-clippedexp" | "poisson" => GlmModel::poisson_clipped_exp(),
            "poisson-exp" => GlmModel { link: LinkSpec::of(LinkFamily::Exp)?, law: ResponseLaw::Poisson },
            "logistic" => GlmModel::logistic(),
            "cloglog" => GlmModel { link: LinkSpec::of(LinkFamily::Cloglog)?, law: ResponseLaw::Bernoulli },
            "piecewise" => GlmModel::piecewise(0.04),
            "square" => GlmModel::square(0.04),
            "linear" => GlmModel {
                link: LinkSpec::of(LinkFamily::Linear)?,
                law: ResponseLaw::GaussianAdditive { sigma_e2: 1.0 },
            },
            "exponential" => GlmModel { link: LinkSpec::of(LinkFamily::Exp)?, law: ResponseLaw::Exponential },
            other => return Err(Error::Parse(format!("unknown model '{other}'"))),
        })
    }
}

/// Size, signal strength and seed of a synthetic draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub p: usize,
    pub gamma2: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(n: usize, p: usize, gamma2: f64, seed: u64) -> Self {
        Self { n, p, gamma2, seed }
    }

    /// `p = round(kappa * n)`.
    pub fn with_kappa(n: usize, kappa: f64, gamma2: f64, seed: u64) -> Self {
        Self { n, p: (kappa * n as f64).round() as usize, gamma2, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 {
            return Err(Error::DimensionMismatch(format!("need n, p >= 1, got n = {}, p = {}", self.n, self.p)));
        }
        if !(self.gamma2 > 0.0) || !self.gamma2.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma2 must be positive, got {}", self.gamma2)));
        }
        Ok(())
    }
}

/// Features, responses and (for synthetic data) the true coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta_true: Option<DVector<f64>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, beta_true: Option<DVector<f64>>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!("X has {} rows but y has {} entries", x.nrows(), y.len())));
        }
        if let Some(b) = &beta_true {
            if b.len() != x.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "X has {} columns but beta_true has {} entries",
                    x.ncols(),
                    b.len()
                )));
            }
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("data contain non-finite values".into()));
        }
        Ok(Self { x, y, beta_true })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn kappa(&self) -> f64 {
        self.p() as f64 / self.n() as f64
    }

    pub fn y_mean(&self) -> f64 {
        self.y.mean()
    }

    pub fn truth(&self) -> Result<&DVector<f64>> {
        self.beta_true.as_ref().ok_or(Error::MissingTruth)
    }

    /// Rows `idx` as a new dataset (truth carried over).
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let x = self.x.select_rows(idx.iter());
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        Dataset { x, y, beta_true: self.beta_true.clone() }
    }
}

/// Draws `(X, y, beta)` with Gaussian rows `x_i = L z_i` and `βᵀΣβ = γ²` exactly.
pub fn sample_dataset(config: &SyntheticConfig, model: &GlmModel, cov: &CovarianceModel) -> Result<Dataset> {
    config.validate()?;
    cov.check_dim(config.p)?;
    let (n, p) = (config.n, config.p);

    let mut rng = stream_rng(config.seed, STREAM_BETA, 0);
    let mut beta: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let q = cov.quad_form(&beta)?;
    let scale = (config.gamma2 / q).sqrt();
    beta.iter_mut().for_each(|b| *b *= scale);

    let mut rows = vec![0.0; n * p];
    rows.par_chunks_mut(p).enumerate().try_for_each(|(i, row)| -> Result<()> {
        let mut r = stream_rng(config.seed, STREAM_X, i as u64);
        row.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut r));
        cov.apply_l(row)
    })?;

    let y: Vec<f64> = rows
        .par_chunks(p)
        .enumerate()
        .map(|(i, row)| {
            let z: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            model.law.h(&model.link, z, derive_seed(config.seed, STREAM_NOISE, i as u64))
        })
        .collect::<Result<_>>()?;

    Dataset::new(DMatrix::from_row_slice(n, p, &rows), DVector::from_vec(y), Some(DVector::from_vec(beta)))
}

/// Writes `x1,...,xp,y` with a header row.
pub fn write_dataset_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(data.p() + 1);
    for i in 0..data.n() {
        rec.clear();
        rec.extend((0..data.p()).map(|j| data.x[(i, j)].to_string()));
        rec.push(data.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset CSV; the last column is the response.
pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let ncols = r.headers()?.len();
    if ncols < 2 {
        return Err(Error::Parse("dataset needs at least one feature column and y".into()));
    }
    let p = ncols - 1;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != ncols {
            return Err(Error::Parse(format!("row {} has {} fields, expected {ncols}", line + 2, rec.len())));
        }
        for (k, field) in rec.iter().enumerate() {
            let v: f64 =
                field.parse().map_err(|_| Error::Parse(format!("row {}: '{field}' is not a number", line + 2)))?;
            if k < p {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let n = ys.len();
    Dataset::new(DMatrix::from_row_slice(n, p, &xs), DVector::from_vec(ys), None)
}

/// One value per line.
pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(v.len() * 24);
    for x in v {
        s.push_str(&x.to_string());
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse().map_err(|_| Error::Parse(format!("'{l}' is not a number"))))
        .collect()
}
