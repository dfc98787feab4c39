//! Proximal operator of `ηG`: the root `z` of `z + η g(z) = x`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::link::LinkSpec;

const ABS_TOL: f64 = 1e-12;
const MAX_ITER: usize = 100;
const MAX_DOUBLINGS: usize = 60;

/// prox_{ηG}(x) for a monotone link.
pub fn prox(link: &LinkSpec, eta: f64, x: f64) -> Result<f64> {
    link.require_monotone()?;
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("prox scale must be nonnegative, got {eta}")));
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("prox argument must be finite, got {x}")));
    }
    prox_unchecked(link, eta, x)
}

/// Same as [`prox`] without argument validation. The link must be monotone.
#[inline]
pub(crate) fn prox_unchecked(link: &LinkSpec, eta: f64, x: f64) -> Result<f64> {
    if eta == 0.0 {
        return Ok(x);
    }
    let phi = |z: f64| z + eta * link.g(z) - x;
    let gx = link.g(x);
    if gx == 0.0 {
        return Ok(x);
    }
    // phi(x) = eta g(x); by monotonicity the root sits between x and x - eta g(x)
    let other = x - eta * gx;
    let (mut lo, mut hi) = if gx > 0.0 { (other, x) } else { (x, other) };
    if !(lo.is_finite() && hi.is_finite()) {
        (lo, hi) = expand_bracket(&phi, x)?;
    }

    let mut z = x;
    for _ in 0..MAX_ITER {
        let f = phi(z);
        if f == 0.0 {
            return Ok(z);
        }
        if f < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let gz = link.g(z);
        let (step, settled) = if f > 0.0 && gz > 0.0 && z < x {
            // Newton on log(eta g(z)) = log(x - z); converges in a few steps
            // even when g grows exponentially
            let h = (eta * gz).ln() - (x - z).ln();
            (h / (link.dg(z) / gz + 1.0 / (x - z)), h.abs() <= 1e-9)
        } else {
            (f / (1.0 + eta * link.dg(z)), true)
        };
        if step.abs() <= ABS_TOL && settled {
            return Ok(z - step);
        }
        let mut next = z - step;
        // a tiny step far from the root means x - z has collapsed
        if !(next > lo && next < hi) || !settled && step.abs() <= ABS_TOL {
            next = 0.5 * (lo + hi);
        }
        z = next;
        if hi - lo <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
            break;
        }
    }
    Ok(z)
}

fn expand_bracket(phi: &impl Fn(f64) -> f64, x: f64) -> Result<(f64, f64)> {
    let mut w = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        let (lo, hi) = (x - w, x + w);
        let (fl, fh) = (phi(lo), phi(hi));
        if fl <= 0.0 && fh >= 0.0 {
            return Ok((lo, hi));
        }
        w *= 2.0;
    }
    Err(Error::BracketFailure(x))
}

/// Evaluates prox over `xs` at a fixed `(eta, link)`.
pub fn prox_batch(link: &LinkSpec, eta: f64, xs: &[f64]) -> Result<Vec<f64>> {
    link.require_monotone()?;
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("prox scale must be nonnegative, got {eta}")));
    }
    xs.par_iter()
        .with_min_len(4096)
        .map(|&x| {
            if x.is_finite() {
                prox_unchecked(link, eta, x)
            } else {
                Err(Error::InvalidArgument(format!("prox argument must be finite, got {x}")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{make_link, LinkFamily};
    use proptest::prelude::*;

    fn monotone_links() -> Vec<LinkSpec> {
        vec![
            LinkSpec::logistic(),
            LinkSpec::clipped_exp(50.0).unwrap(),
            make_link(LinkFamily::Exp).unwrap(),
            LinkSpec::piecewise(5.0, 0.1).unwrap(),
            make_link(LinkFamily::Cloglog).unwrap(),
            make_link(LinkFamily::Linear).unwrap(),
        ]
    }

    // plain bisection to machine precision
    fn bisect_oracle(link: &LinkSpec, eta: f64, x: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + eta * link.g(mid) - x < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zero_scale_is_identity() {
        for l in monotone_links() {
            assert_eq!(prox(&l, 0.0, 3.7).unwrap(), 3.7);
        }
    }

    #[test]
    fn linear_closed_form() {
        let l = make_link(LinkFamily::Linear).unwrap();
        assert!((prox(&l, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_known_root() {
        let l = LinkSpec::logistic();
        assert!(prox(&l, 2.0, 1.0).unwrap().abs() < 1e-12);
        let oracle = bisect_oracle(&l, 1.0, -3.0, -4.0, -2.0);
        assert!((prox(&l, 1.0, -3.0).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_rejected() {
        let sq = make_link(LinkFamily::Square).unwrap();
        assert!(matches!(prox(&sq, 1.0, 1.0), Err(Error::NonMonotoneLink)));
        assert!(matches!(prox_batch(&sq, 1.0, &[1.0]), Err(Error::NonMonotoneLink)));
    }

    #[test]
    fn batch_matches_scalar() {
        let l = LinkSpec::clipped_exp(50.0).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|i| -20.0 + 0.004 * i as f64).collect();
        let batch = prox_batch(&l, 0.7, &xs).unwrap();
        for (x, b) in xs.iter().zip(&batch) {
            assert_eq!(*b, prox(&l, 0.7, *x).unwrap());
        }
    }

    #[test]
    fn exp_with_overflowing_argument() {
        let l = make_link(LinkFamily::Exp).unwrap();
        // g(x) overflows, so the bracket comes from geometric expansion
        let z = prox(&l, 1.0, 750.0).unwrap();
        assert!((z + z.exp() - 750.0).abs() <= 1e-10 * 750.0);
    }

    #[test]
    fn fixed_point_and_lipschitz_on_grid() {
        for l in monotone_links() {
            for &eta in &[0.01, 0.3, 1.0, 5.0, 40.0] {
                let mut prev: Option<(f64, f64)> = None;
                for i in 0..400 {
                    let x = -30.0 + 0.15 * i as f64;
                    let z = prox(&l, eta, x).unwrap();
                    assert!((z + eta * l.g(z) - x).abs() <= 1e-10, "{} eta {eta} x {x}", l.name());
                    if let Some((px, pz)) = prev {
                        assert!(z >= pz);
                        assert!(z - pz <= x - px + 1e-12);
                    }
                    prev = Some((x, z));
                }
            }
        }
    }

    #[test]
    fn large_scale_far_from_the_root() {
        // g(x) ~ 1 while the root sits near -1.42, far below x
        let l = LinkSpec::logistic();
        let (eta, x) = (71.945_147_862_780_23, 12.574_431_905_240_107);
        let z = prox(&l, eta, x).unwrap();
        let oracle = bisect_oracle(&l, eta, x, x - eta, x);
        assert!((z - oracle).abs() < 1e-10, "{z} vs {oracle}");
    }

    proptest! {
        #[test]
        fn fixed_point_over_wide_scales(x in -30.0f64..30.0, log_eta in -3.0f64..2.5, k in 0usize..6) {
            let l = monotone_links()[k];
            let eta = 10f64.powf(log_eta);
            let z = prox(&l, eta, x).unwrap();
            prop_assert!((z + eta * l.g(z) - x).abs() <= 1e-9 * (1.0 + x.abs()));
        }

        #[test]
        fn scale_continuity(x in -10.0f64..10.0, eta in 0.0f64..5.0, d in 0.0f64..1.0, k in 0usize..6) {
            let l = monotone_links()[k];
            let a = prox(&l, eta, x).unwrap();
            let b = prox(&l, eta + d, x).unwrap();
            // both roots lie between the two and x, where |g| is bounded by its value at the ends
            let bound = [a, b, x].iter().map(|t| l.g(*t).abs()).fold(0.0, f64::max);
            prop_assert!((a - b).abs() <= bound * d + 1e-10);
        }
    }
}
