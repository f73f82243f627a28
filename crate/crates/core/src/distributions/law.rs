use super::{ScaledBeta, StreamRng, TruncNormal, Univariate};
use crate::error::Result;

/// One of the shock families used by the model, or a point mass.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Point(f64),
    Beta(ScaledBeta),
    Normal(TruncNormal),
}

impl Law {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Law::Point(_))
    }

    pub fn variance(&self) -> f64 {
        match self {
            Law::Point(_) => 0.0,
            Law::Beta(d) => d.variance(),
            Law::Normal(d) => d.variance(),
        }
    }
}

impl Univariate for Law {
    fn support(&self) -> (f64, f64) {
        match self {
            Law::Point(x) => (*x, *x),
            Law::Beta(d) => d.support(),
            Law::Normal(d) => d.support(),
        }
    }

    fn ln_density(&self, x: f64) -> f64 {
        match self {
            Law::Point(c) => {
                if x == *c {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
            Law::Beta(d) => d.ln_density(x),
            Law::Normal(d) => d.ln_density(x),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            Law::Point(c) => {
                if x >= *c {
                    1.0
                } else {
                    0.0
                }
            }
            Law::Beta(d) => d.cdf(x),
            Law::Normal(d) => d.cdf(x),
        }
    }

    fn mean(&self) -> f64 {
        match self {
            Law::Point(c) => *c,
            Law::Beta(d) => d.mean(),
            Law::Normal(d) => d.mean(),
        }
    }

    fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            Law::Point(c) => *c,
            Law::Beta(d) => d.sample(rng),
            Law::Normal(d) => d.sample(rng),
        }
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            Law::Point(c) => {
                if (0.0..=1.0).contains(&p) {
                    Ok(*c)
                } else {
                    Err(crate::error::invalid(format!(
                        "probability {p} outside [0, 1]"
                    )))
                }
            }
            Law::Beta(d) => d.quantile(p),
            Law::Normal(d) => d.quantile(p),
        }
    }
}
