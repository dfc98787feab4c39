//! Response laws `Y = h(z, noise)`.
//!
//! The noise variable is represented by a 64-bit key. `h` expands the key
//! into whatever uniforms or normals the law needs, so a fixed key gives the
//! same response for the same `z`.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::LinkSpec;
use crate::rng::{open_unit, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ResponseLaw {
    Bernoulli,
    Poisson,
    GaussianAdditive { sigma_e2: f64 },
    Exponential,
}

impl ResponseLaw {
    /// Deterministic response for linear predictor `z` and noise key `noise`.
    pub fn h(&self, link: &LinkSpec, z: f64, noise: u64) -> Result<f64> {
        let mean = link.g(z);
        let mut rng = SplitMix64::new(noise);
        match *self {
            ResponseLaw::Bernoulli => Ok(if open_unit(&mut rng) <= mean { 1.0 } else { 0.0 }),
            ResponseLaw::Poisson => {
                if !(mean > 0.0) {
                    return Err(Error::InvalidRate(mean));
                }
                // unit-rate arrivals counted up to time g(z)
                let mut t = 0.0;
                let mut count = 0u64;
                loop {
                    t -= open_unit(&mut rng).ln();
                    if t > mean {
                        break;
                    }
                    count += 1;
                }
                Ok(count as f64)
            }
            ResponseLaw::GaussianAdditive { sigma_e2 } => {
                if sigma_e2 == 0.0 {
                    return Ok(mean);
                }
                let e: f64 = StandardNormal.sample(&mut rng);
                Ok(mean + sigma_e2.sqrt() * e)
            }
            ResponseLaw::Exponential => {
                if !(mean > 0.0) {
                    return Err(Error::InvalidRate(mean));
                }
                Ok(-mean * open_unit(&mut rng).ln())
            }
        }
    }

    /// Noise variance parameter of the Gaussian law.
    pub fn sigma_e2(&self) -> Option<f64> {
        match *self {
            ResponseLaw::GaussianAdditive { sigma_e2 } => Some(sigma_e2),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ResponseLaw::GaussianAdditive { sigma_e2 } = *self {
            if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
                return Err(Error::InvalidArgument(format!("sigma_e2 must be nonnegative, got {sigma_e2}")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        match *self {
            ResponseLaw::Bernoulli => "bernoulli".into(),
            ResponseLaw::Poisson => "poisson".into(),
            ResponseLaw::GaussianAdditive { sigma_e2 } => format!("gaussian:{sigma_e2}"),
            ResponseLaw::Exponential => "exponential".into(),
        }
    }
}

impl std::str::FromStr for ResponseLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.to_string(), Some(a.to_string())),
            None => (s.clone(), None),
        };
        let law = match head.as_str() {
            "bernoulli" => ResponseLaw::Bernoulli,
            "poisson" => ResponseLaw::Poisson,
            "exponential" => ResponseLaw::Exponential,
            "gaussian" | "normal" => {
                let sigma_e2 = match arg {
                    Some(a) => a.trim().parse().map_err(|_| Error::Parse(format!("bad noise variance '{a}'")))?,
                    None => 1.0,
                };
                ResponseLaw::GaussianAdditive { sigma_e2 }
            }
            other => return Err(Error::Parse(format!("unknown response law '{other}'"))),
        };
        law.validate()?;
        Ok(law)
    }
}

/// Draws one response at `z`, consuming a single key from `rng`.
pub fn h_sample<R: RngCore + ?Sized>(law: &ResponseLaw, link: &LinkSpec, z: f64, rng: &mut R) -> Result<f64> {
    law.h(link, z, rng.next_u64())
}
