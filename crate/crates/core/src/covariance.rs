//! Feature covariance models and their Cholesky factors.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Covariance Σ = L Lᵀ of the Gaussian feature rows.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceModel {
    Identity,
    Ar1 { rho: f64 },
    Explicit { sigma: DMatrix<f64>, chol: DMatrix<f64> },
}

/// Serializable description (explicit matrices are not round-tripped).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceTag {
    Identity,
    Ar1 { rho: f64 },
    Explicit { p: usize },
}

impl CovarianceModel {
    pub fn ar1(rho: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::InvalidArgument(format!("AR1 coefficient must lie in (-1, 1), got {rho}")));
        }
        Ok(CovarianceModel::Ar1 { rho })
    }

    pub fn explicit(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() {
            return Err(Error::DimensionMismatch("covariance must be square".into()));
        }
        let p = sigma.nrows();
        for i in 0..p {
            for j in 0..i {
                let (a, b) = (sigma[(i, j)], sigma[(j, i)]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidArgument("covariance must be symmetric".into()));
                }
            }
        }
        let chol = Cholesky::new(sigma.clone())
            .ok_or_else(|| Error::InvalidArgument("covariance must be positive definite".into()))?
            .unpack();
        Ok(CovarianceModel::Explicit { sigma, chol })
    }

    pub fn tag(&self) -> CovarianceTag {
        match self {
            CovarianceModel::Identity => CovarianceTag::Identity,
            CovarianceModel::Ar1 { rho } => CovarianceTag::Ar1 { rho: *rho },
            CovarianceModel::Explicit { sigma, .. } => CovarianceTag::Explicit { p: sigma.nrows() },
        }
    }

    /// Checks that the model can serve dimension `p`.
    pub fn check_dim(&self, p: usize) -> Result<()> {
        match self {
            CovarianceModel::Explicit { sigma, .. } if sigma.nrows() != p => Err(Error::DimensionMismatch(format!(
                "covariance is {}x{}, coefficient dimension is {p}",
                sigma.nrows(),
                sigma.nrows()
            ))),
            _ => Ok(()),
        }
    }

    /// Entry Σ_ij.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            CovarianceModel::Identity => (i == j) as u8 as f64,
            CovarianceModel::Ar1 { rho } => rho.powi(i.abs_diff(j) as i32),
            CovarianceModel::Explicit { sigma, .. } => sigma[(i, j)],
        }
    }

    pub fn sigma(&self, p: usize) -> Result<DMatrix<f64>> {
        self.check_dim(p)?;
        Ok(DMatrix::from_fn(p, p, |i, j| self.entry(i, j)))
    }

    /// Lower Cholesky factor L.
    pub fn chol_lower(&self, p: usize) -> Result<DMatrix<f64>> {
        self.check_dim(p)?;
        Ok(match self {
            CovarianceModel::Identity => DMatrix::identity(p, p),
            CovarianceModel::Ar1 { rho } => {
                let s = (1.0 - rho * rho).sqrt();
                DMatrix::from_fn(p, p, |j, k| {
                    if k > j {
                        0.0
                    } else if k == 0 {
                        rho.powi(j as i32)
                    } else {
                        s * rho.powi((j - k) as i32)
                    }
                })
            }
            CovarianceModel::Explicit { chol, .. } => chol.clone(),
        })
    }

    /// Overwrites `z` with `L z`.
    pub fn apply_l(&self, z: &mut [f64]) -> Result<()> {
        self.check_dim(z.len())?;
        match self {
            CovarianceModel::Identity => {}
            CovarianceModel::Ar1 { rho } => {
                let s = (1.0 - rho * rho).sqrt();
                for j in 1..z.len() {
                    z[j] = rho * z[j - 1] + s * z[j];
                }
            }
            CovarianceModel::Explicit { chol, .. } => {
                let p = z.len();
                for j in (0..p).rev() {
                    let mut acc = 0.0;
                    for k in 0..=j {
                        acc += chol[(j, k)] * z[k];
                    }
                    z[j] = acc;
                }
            }
        }
        Ok(())
    }

    /// θ = Lᵀ β.
    pub fn lt_mul(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(beta.len())?;
        let p = beta.len();
        Ok(match self {
            CovarianceModel::Identity => beta.to_vec(),
            CovarianceModel::Ar1 { rho } => {
                if p == 0 {
                    return Ok(Vec::new());
                }
                let s = (1.0 - rho * rho).sqrt();
                let mut r = vec![0.0; p];
                r[p - 1] = beta[p - 1];
                for k in (0..p - 1).rev() {
                    r[k] = beta[k] + rho * r[k + 1];
                }
                for v in r.iter_mut().skip(1) {
                    *v *= s;
                }
                r
            }
            CovarianceModel::Explicit { chol, .. } => {
                (0..p).map(|k| (k..p).map(|j| chol[(j, k)] * beta[j]).sum()).collect()
            }
        })
    }

    /// βᵀ Σ β.
    pub fn quad_form(&self, beta: &[f64]) -> Result<f64> {
        Ok(self.lt_mul(beta)?.iter().map(|v| v * v).sum())
    }
}

impl std::str::FromStr for CovarianceModel {
    type Err = Error;

    /// `identity` or `ar1:rho`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once(':') {
            None if s == "identity" => Ok(CovarianceModel::Identity),
            Some(("ar1", rho)) => {
                let rho = rho.trim().parse().map_err(|_| Error::Parse(format!("bad AR1 coefficient '{rho}'")))?;
                CovarianceModel::ar1(rho)
            }
            _ => Err(Error::Parse(format!("unknown covariance '{s}' (expected identity or ar1:rho)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names() {
        assert_eq!("identity".parse::<CovarianceModel>().unwrap(), CovarianceModel::Identity);
        assert_eq!("AR1:0.5".parse::<CovarianceModel>().unwrap(), CovarianceModel::Ar1 { rho: 0.5 });
        assert!("ar1:1.5".parse::<CovarianceModel>().is_err());
        assert!("toeplitz".parse::<CovarianceModel>().is_err());
    }

    fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn ar1_factor_reconstructs() {
        let cov = CovarianceModel::ar1(0.5).unwrap();
        let p = 40;
        let l = cov.chol_lower(p).unwrap();
        let s = cov.sigma(p).unwrap();
        assert!(rel_err(&(&l * l.transpose()), &s) <= 1e-10);
        assert_eq!(s[(3, 7)], 0.5f64.powi(4));
    }

    #[test]
    fn explicit_factor_reconstructs() {
        let a = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let sigma = &a * a.transpose() + DMatrix::identity(6, 6);
        let cov = CovarianceModel::explicit(sigma.clone()).unwrap();
        let l = cov.chol_lower(6).unwrap();
        assert!(rel_err(&(&l * l.transpose()), &sigma) <= 1e-10);
    }

    #[test]
    fn fast_products_match_dense() {
        let beta: Vec<f64> = (0..25).map(|i| ((i * 37) % 11) as f64 / 5.0 - 1.0).collect();
        let a = DMatrix::from_fn(25, 25, |i, j| ((i * 3 + j * 5) % 7) as f64 / 7.0);
        let explicit = CovarianceModel::explicit(&a * a.transpose() + DMatrix::identity(25, 25)).unwrap();
        for cov in [CovarianceModel::Identity, CovarianceModel::ar1(-0.7).unwrap(), explicit] {
            let l = cov.chol_lower(25).unwrap();
            let b = nalgebra::DVector::from_vec(beta.clone());
            let theta = l.transpose() * &b;
            let fast = cov.lt_mul(&beta).unwrap();
            for k in 0..25 {
                assert!((theta[k] - fast[k]).abs() < 1e-12);
            }
            let mut z = beta.clone();
            cov.apply_l(&mut z).unwrap();
            let lz = &l * &b;
            for k in 0..25 {
                assert!((lz[k] - z[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(CovarianceModel::ar1(1.0).is_err());
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(CovarianceModel::explicit(not_pd).is_err());
        let cov = CovarianceModel::explicit(DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(cov.lt_mul(&[1.0; 4]), Err(Error::DimensionMismatch(_))));
    }
}
