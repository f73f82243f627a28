use rand::Rng;
use rand_distr::{Beta, Distribution};
use statrs::function::beta::{beta_reg, ln_beta};

use super::{StreamRng, Univariate};
use crate::error::{invalid, Result};

/// `shift + scale · B` where `B ~ Beta(a, b)` is optionally truncated to
/// `[lo, hi] ⊂ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledBeta {
    pub a: f64,
    pub b: f64,
    pub lo: f64,
    pub hi: f64,
    pub scale: f64,
    pub shift: f64,
    cdf_lo: f64,
    mass: f64,
    ln_norm: f64,
}

impl ScaledBeta {
    pub fn new(a: f64, b: f64, trunc: Option<(f64, f64)>, scale: f64, shift: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(invalid(format!(
                "beta shapes must be positive, got ({a}, {b})"
            )));
        }
        if !(scale > 0.0 && scale.is_finite() && shift.is_finite()) {
            return Err(invalid(format!("beta scale must be positive, got {scale}")));
        }
        let (lo, hi) = trunc.unwrap_or((0.0, 1.0));
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(invalid(format!(
                "truncation [{lo}, {hi}] not inside [0, 1]"
            )));
        }
        let cdf_lo = if lo > 0.0 { beta_reg(a, b, lo) } else { 0.0 };
        let cdf_hi = if hi < 1.0 { beta_reg(a, b, hi) } else { 1.0 };
        let mass = cdf_hi - cdf_lo;
        if !(mass > 0.0) {
            return Err(invalid("beta truncation interval carries no probability"));
        }
        let ln_norm = ln_beta(a, b) + mass.ln() + scale.ln();
        Ok(Self {
            a,
            b,
            lo,
            hi,
            scale,
            shift,
            cdf_lo,
            mass,
            ln_norm,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    // E[B^k ; lo ≤ B ≤ hi] / mass, via Beta(a+k, b).
    fn unit_moment(&self, k: u32) -> f64 {
        let (a, b) = (self.a, self.b);
        let mut coef = 1.0;
        for j in 0..k {
            coef *= (a + j as f64) / (a + b + j as f64);
        }
        let ak = a + k as f64;
        let up = if self.hi < 1.0 {
            beta_reg(ak, b, self.hi)
        } else {
            1.0
        };
        let down = if self.lo > 0.0 {
            beta_reg(ak, b, self.lo)
        } else {
            0.0
        };
        coef * (up - down) / self.mass
    }

    pub fn variance(&self) -> f64 {
        let m1 = self.unit_moment(1);
        self.scale * self.scale * (self.unit_moment(2) - m1 * m1)
    }

    /// Log density of the unit-interval variable, before scaling.
    #[inline]
    pub fn ln_density_unit(&self, y: f64) -> f64 {
        if y < self.lo || y > self.hi {
            return f64::NEG_INFINITY;
        }
        let mut s = -self.ln_norm + self.scale.ln();
        if self.a != 1.0 {
            s += (self.a - 1.0) * y.ln();
        }
        if self.b != 1.0 {
            s += (self.b - 1.0) * (1.0 - y).ln();
        }
        s
    }
}

impl Univariate for ScaledBeta {
    fn support(&self) -> (f64, f64) {
        (
            self.shift + self.scale * self.lo,
            self.shift + self.scale * self.hi,
        )
    }

    fn ln_density(&self, x: f64) -> f64 {
        let y = (x - self.shift) / self.scale;
        self.ln_density_unit(y) - self.scale.ln()
    }

    fn cdf(&self, x: f64) -> f64 {
        let y = (x - self.shift) / self.scale;
        if y <= self.lo {
            return 0.0;
        }
        if y >= self.hi {
            return 1.0;
        }
        ((beta_reg(self.a, self.b, y) - self.cdf_lo) / self.mass).clamp(0.0, 1.0)
    }

    fn mean(&self) -> f64 {
        self.shift + self.scale * self.unit_moment(1)
    }

    fn sample(&self, rng: &mut StreamRng) -> f64 {
        if self.mass >= 0.25 {
            let d = Beta::new(self.a, self.b).expect("validated in constructor");
            loop {
                let y = d.sample(rng);
                if y >= self.lo && y <= self.hi {
                    return self.shift + self.scale * y;
                }
            }
        }
        let p: f64 = rng.random();
        self.quantile(p).expect("p in [0, 1)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    #[test]
    fn untruncated_moments_closed_form() {
        let d = ScaledBeta::new(2.0, 3.0, None, 1.0, 0.0).unwrap();
        assert!((d.mean() - 0.4).abs() < 1e-14);
        assert!((d.variance() - 0.04).abs() < 1e-14);
    }

    #[test]
    fn truncated_variance_matches_quadrature() {
        let d = ScaledBeta::new(0.8, 0.9, Some((0.025, 0.975)), 5.0, 5.0).unwrap();
        let gl = GaussLegendre::new(64);
        let (a, b) = d.support();
        let m = d.mean();
        let v = gl.integrate_composite(a, b, 20, |x| (x - m).powi(2) * d.density(x));
        assert!((v - d.variance()).abs() < 1e-9);
    }

    #[test]
    fn uniform_special_case() {
        let d = ScaledBeta::new(1.0, 1.0, None, 2.0, -1.0).unwrap();
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-14);
        assert!((d.density(0.3) - 0.5).abs() < 1e-14);
    }
}
