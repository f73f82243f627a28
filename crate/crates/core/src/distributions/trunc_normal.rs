use rand_distr::{Distribution, Normal};
use statrs::function::erf::erfc;

use super::{StreamRng, Univariate};
use crate::error::{invalid, Result};
use rand::Rng;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Normal law truncated to `[lower, upper]`; `upper` may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncNormal {
    pub mu: f64,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
    tail_form: bool,
    mass: f64,
    ln_mass: f64,
}

// Upper-tail normal probability, accurate far into the tail.
fn sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn cdf_std(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl TruncNormal {
    pub fn new(mu: f64, sigma: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(invalid(format!(
                "truncated normal needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        if !(lower < upper) {
            return Err(invalid("truncated normal needs lower < upper"));
        }
        let za = (lower - mu) / sigma;
        let zb = (upper - mu) / sigma;
        let tail_form = za > 0.0;
        let mass = if tail_form {
            sf(za) - sf(zb)
        } else {
            cdf_std(zb) - cdf_std(za)
        };
        if !(mass > 0.0) {
            return Err(invalid("truncation interval carries no probability"));
        }
        Ok(Self {
            mu,
            sigma,
            lower,
            upper,
            tail_form,
            mass,
            ln_mass: mass.ln(),
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn variance(&self) -> f64 {
        let a = (self.lower - self.mu) / self.sigma;
        let b = (self.upper - self.mu) / self.sigma;
        let pdf = |z: f64| {
            if z.is_finite() {
                (-0.5 * z * z - LN_SQRT_2PI).exp()
            } else {
                0.0
            }
        };
        let zpdf = |z: f64| if z.is_finite() { z * pdf(z) } else { 0.0 };
        let r = (pdf(a) - pdf(b)) / self.mass;
        self.sigma * self.sigma * (1.0 + (zpdf(a) - zpdf(b)) / self.mass - r * r)
    }
}

impl Univariate for TruncNormal {
    fn support(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    fn ln_density(&self, x: f64) -> f64 {
        if x < self.lower || x > self.upper {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.mu) / self.sigma;
        -0.5 * z * z - LN_SQRT_2PI - self.sigma.ln() - self.ln_mass
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            return 0.0;
        }
        if x >= self.upper {
            return 1.0;
        }
        let z = (x - self.mu) / self.sigma;
        let za = (self.lower - self.mu) / self.sigma;
        let v = if self.tail_form {
            (sf(za) - sf(z)) / self.mass
        } else {
            (cdf_std(z) - cdf_std(za)) / self.mass
        };
        v.clamp(0.0, 1.0)
    }

    fn mean(&self) -> f64 {
        let a = (self.lower - self.mu) / self.sigma;
        let b = (self.upper - self.mu) / self.sigma;
        let pdf = |z: f64| {
            if z.is_finite() {
                (-0.5 * z * z - LN_SQRT_2PI).exp()
            } else {
                0.0
            }
        };
        self.mu + self.sigma * (pdf(a) - pdf(b)) / self.mass
    }

    fn sample(&self, rng: &mut StreamRng) -> f64 {
        if self.mass >= 0.25 {
            let n = Normal::new(self.mu, self.sigma).expect("validated in constructor");
            loop {
                let x = n.sample(rng);
                if x >= self.lower && x <= self.upper {
                    return x;
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
    use crate::distributions::stream_rng;

    #[test]
    fn moments_match_sampling() {
        let d = TruncNormal::new(0.0, 1.0, 0.0, f64::INFINITY).unwrap();
        // Half-normal mean sqrt(2/π), variance 1 - 2/π.
        assert!((d.mean() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        assert!((d.variance() - (1.0 - 2.0 / std::f64::consts::PI)).abs() < 1e-14);
        let mut rng = stream_rng(11, 0);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - d.mean()).abs() < 5e-3);
    }

    #[test]
    fn far_tail_truncation_is_accurate() {
        let d = TruncNormal::new(0.0, 1.0, 9.0, f64::INFINITY).unwrap();
        let x = d.quantile(0.5).unwrap();
        assert!(x > 9.0 && x < 9.2);
        assert!((d.cdf(x) - 0.5).abs() < 1e-9);
        let mut rng = stream_rng(3, 1);
        assert!(d.sample(&mut rng) >= 9.0);
    }
}
