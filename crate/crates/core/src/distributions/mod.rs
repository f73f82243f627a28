//! Shock distributions, random streams and characteristic-function inversion.

mod beta;
pub mod charfn;
mod law;
mod rng;
mod trunc_normal;

pub use beta::ScaledBeta;
pub use law::Law;
pub use rng::{derive_seed, stream_rng, StreamRng};
pub use trunc_normal::TruncNormal;

use crate::error::{invalid, Result};

/// A continuous law on an interval.
pub trait Univariate {
    fn support(&self) -> (f64, f64);
    fn ln_density(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;
    fn mean(&self) -> f64;
    fn sample(&self, rng: &mut StreamRng) -> f64;

    fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        invert_cdf(self, p)
    }
}

/// Solves `F(x) = p` by Newton steps kept inside a shrinking bracket.
pub fn invert_cdf<D: Univariate + ?Sized>(dist: &D, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("probability {p} outside [0, 1]")));
    }
    let (mut lo, mut hi) = dist.support();
    if p == 0.0 && lo.is_finite() {
        return Ok(lo);
    }
    if p == 1.0 && hi.is_finite() {
        return Ok(hi);
    }
    // Unbounded sides are bracketed by stepping outwards.
    if !lo.is_finite() || !hi.is_finite() {
        let m = dist.mean();
        let mut step = 1.0;
        if !lo.is_finite() {
            lo = m - step;
            while dist.cdf(lo) > p {
                step *= 2.0;
                lo = m - step;
            }
        }
        step = 1.0;
        if !hi.is_finite() {
            hi = m + step;
            while dist.cdf(hi) < p {
                step *= 2.0;
                hi = m + step;
            }
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = dist.cdf(x) - p;
        if f.abs() <= 1e-15 {
            return Ok(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = dist.density(x);
        let newton = x - f / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    Ok(x)
}
