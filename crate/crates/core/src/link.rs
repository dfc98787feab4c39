//! Inverse link families with their antiderivatives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Link family tag with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LinkFamily {
    Logistic,
    /// `e^t` up to `log c`, continued linearly with slope `c` beyond.
    ClippedExp { threshold: f64 },
    /// Unclipped exponential.
    Exp,
    /// `min(slope_pos * t, slope_neg * t)`.
    Piecewise { slope_pos: f64, slope_neg: f64 },
    Cloglog,
    Linear,
    Square,
}

/// An inverse link `g` together with `G` (G' = g) and `g'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub family: LinkFamily,
    pub is_monotone: bool,
    pub even_part_strictly_monotone: bool,
    #[serde(skip)]
    kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
enum Kind {
    #[default]
    Logistic,
    ClippedExp { c: f64, log_c: f64 },
    Exp,
    // steep slope applies for t < 0, shallow for t >= 0
    Piecewise { steep: f64, shallow: f64 },
    Cloglog,
    Linear,
    Square,
}

/// Builds a validated [`LinkSpec`].
pub fn make_link(family: LinkFamily) -> Result<LinkSpec> {
    let (kind, mono, even) = match family {
        LinkFamily::Logistic => (Kind::Logistic, true, false),
        LinkFamily::ClippedExp { threshold } => {
            if !(threshold > 0.0) || !threshold.is_finite() {
                return Err(Error::InvalidLinkParameter(format!(
                    "clipped-exp threshold must be positive, got {threshold}"
                )));
            }
            (Kind::ClippedExp { c: threshold, log_c: threshold.ln() }, true, true)
        }
        LinkFamily::Exp => (Kind::Exp, true, true),
        LinkFamily::Piecewise { slope_pos, slope_neg } => {
            if !(slope_pos > 0.0 && slope_neg > 0.0) || !slope_pos.is_finite() || !slope_neg.is_finite() {
                return Err(Error::InvalidLinkParameter(format!(
                    "piecewise slopes must be positive, got ({slope_pos}, {slope_neg})"
                )));
            }
            if slope_pos == slope_neg {
                return Err(Error::InvalidLinkParameter("piecewise slopes must differ".into()));
            }
            let kind = Kind::Piecewise { steep: slope_pos.max(slope_neg), shallow: slope_pos.min(slope_neg) };
            (kind, true, true)
        }
        LinkFamily::Cloglog => (Kind::Cloglog, true, true),
        LinkFamily::Linear => (Kind::Linear, true, false),
        LinkFamily::Square => (Kind::Square, false, true),
    };
    Ok(LinkSpec { family, is_monotone: mono, even_part_strictly_monotone: even, kind })
}

impl LinkSpec {
    pub fn logistic() -> Self {
        make_link(LinkFamily::Logistic).unwrap()
    }

    pub fn clipped_exp(threshold: f64) -> Result<Self> {
        make_link(LinkFamily::ClippedExp { threshold })
    }

    pub fn piecewise(slope_pos: f64, slope_neg: f64) -> Result<Self> {
        make_link(LinkFamily::Piecewise { slope_pos, slope_neg })
    }

    pub fn of(family: LinkFamily) -> Result<Self> {
        make_link(family)
    }

    /// Inverse link g(t).
    #[inline]
    pub fn g(&self, t: f64) -> f64 {
        match self.kind {
            Kind::Logistic => {
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            Kind::ClippedExp { c, log_c } => {
                if t <= log_c {
                    t.exp()
                } else {
                    c * (1.0 + t - log_c)
                }
            }
            Kind::Exp => t.exp(),
            Kind::Piecewise { steep, shallow } => {
                if t < 0.0 {
                    steep * t
                } else {
                    shallow * t
                }
            }
            Kind::Cloglog => -(-t.exp()).exp_m1(),
            Kind::Linear => t,
            Kind::Square => t * t,
        }
    }

    /// Derivative g'(t).
    #[inline]
    pub fn dg(&self, t: f64) -> f64 {
        match self.kind {
            Kind::Logistic => {
                let s = self.g(t);
                s * (1.0 - s)
            }
            Kind::ClippedExp { c, log_c } => {
                if t <= log_c {
                    t.exp()
                } else {
                    c
                }
            }
            Kind::Exp => t.exp(),
            Kind::Piecewise { steep, shallow } => {
                if t < 0.0 {
                    steep
                } else {
                    shallow
                }
            }
            Kind::Cloglog => (t - t.exp()).exp(),
            Kind::Linear => 1.0,
            Kind::Square => 2.0 * t,
        }
    }

    /// Antiderivative G(t), normalized so that G(-inf) = 0 where that limit exists.
    pub fn big_g(&self, t: f64) -> f64 {
        match self.kind {
            Kind::Logistic => t.max(0.0) + (-t.abs()).exp().ln_1p(),
            Kind::ClippedExp { c, log_c } => {
                if t <= log_c {
                    t.exp()
                } else {
                    let u = t - log_c;
                    c + c * (u + 0.5 * u * u)
                }
            }
            Kind::Exp => t.exp(),
            Kind::Piecewise { steep, shallow } => {
                if t < 0.0 {
                    0.5 * steep * t * t
                } else {
                    0.5 * shallow * t * t
                }
            }
            Kind::Cloglog => cloglog_antiderivative(t),
            Kind::Linear => 0.5 * t * t,
            Kind::Square => t * t * t / 3.0,
        }
    }

    /// Short name accepted by [`FromStr`].
    pub fn name(&self) -> String {
        match self.family {
            LinkFamily::Logistic => "logistic".into(),
            LinkFamily::ClippedExp { threshold } => format!("clippedexp:{threshold}"),
            LinkFamily::Exp => "exp".into(),
            LinkFamily::Piecewise { slope_pos, slope_neg } => format!("piecewise:{slope_pos},{slope_neg}"),
            LinkFamily::Cloglog => "cloglog".into(),
            LinkFamily::Linear => "linear".into(),
            LinkFamily::Square => "square".into(),
        }
    }

    pub fn require_monotone(&self) -> Result<()> {
        if self.is_monotone {
            Ok(())
        } else {
            Err(Error::NonMonotoneLink)
        }
    }
}

impl fmt::Display for LinkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for LinkSpec {
    type Err = Error;

    /// Accepts `logistic`, `exp`, `clippedexp[:c]`, `piecewise[:a,b]`,
    /// `cloglog`, `linear`, `square`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (head, args) = match s.split_once(':') {
            Some((h, a)) => (h.trim().to_string(), Some(a.trim().to_string())),
            None => (s.clone(), None),
        };
        let nums = |a: &str| -> Result<Vec<f64>> {
            a.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad link parameter '{v}'"))))
                .collect()
        };
        let family = match head.as_str() {
            "logistic" | "logit" => LinkFamily::Logistic,
            "exp" => LinkFamily::Exp,
            "clippedexp" | "clipped-exp" | "clipped_exp" => {
                let threshold = match &args {
                    Some(a) => *nums(a)?.first().ok_or_else(|| Error::Parse("missing threshold".into()))?,
                    None => 50.0,
                };
                LinkFamily::ClippedExp { threshold }
            }
            "piecewise" => {
                let (a, b) = match &args {
                    Some(a) => {
                        let v = nums(a)?;
                        if v.len() != 2 {
                            return Err(Error::Parse("piecewise needs two slopes".into()));
                        }
                        (v[0], v[1])
                    }
                    None => (5.0, 0.1),
                };
                LinkFamily::Piecewise { slope_pos: a, slope_neg: b }
            }
            "cloglog" => LinkFamily::Cloglog,
            "linear" | "identity" => LinkFamily::Linear,
            "square" => LinkFamily::Square,
            other => return Err(Error::Parse(format!("unknown link '{other}'"))),
        };
        make_link(family)
    }
}

// G(t) = t + E1(e^t) + gamma. For e^t <= 2 the series
// G = -sum_{k>=1} (-x)^k / (k k!) avoids the cancellation between t and E1.
fn cloglog_antiderivative(t: f64) -> f64 {
    let x = t.exp();
    if x <= 2.0 {
        let mut sum = 0.0;
        let mut pow_fact = 1.0; // (-x)^k / k!
        for k in 1..200 {
            pow_fact *= -x / k as f64;
            let term = pow_fact / k as f64;
            sum -= term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        t + EULER_GAMMA + exp_integral_e1(x)
    }
}

/// Exponential integral E1(x) for x > 1 by continued fraction.
fn exp_integral_e1(x: f64) -> f64 {
    if x > 745.0 {
        return 0.0;
    }
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x).exp()
}
