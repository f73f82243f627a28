//! Law of a sum of independent bounded shocks, by convolving cell masses.

use crate::distributions::{Law, Univariate};
use crate::error::{invalid, Result};

/// Discretized law of `S = Σ X_j`. Each summand is split into cells of common
/// width `h`; cell masses are exact CDF differences. The sum of the left cell
/// corners is tracked exactly and the within-cell offsets are replaced by
/// their mean, so the representation is accurate to `O(√m · h)`.
#[derive(Debug, Clone)]
pub struct SumLaw {
    origin: f64,
    h: f64,
    // cum[k] = P(S ≤ origin + (k + 1/2) h) for the centred atoms.
    cum: Vec<f64>,
}

impl SumLaw {
    pub fn new(laws: &[&Law], cells_per_law: usize) -> Result<Self> {
        if laws.is_empty() || cells_per_law == 0 {
            return Err(invalid("sum of no laws"));
        }
        let mut widest = 0.0f64;
        for l in laws {
            let (a, b) = l.support();
            if !(a.is_finite() && b.is_finite()) {
                return Err(invalid("sum law needs bounded summands"));
            }
            widest = widest.max(b - a);
        }
        let mut origin = 0.0;
        if widest == 0.0 {
            origin = laws.iter().map(|l| l.support().0).sum();
            return Ok(Self {
                origin,
                h: 0.0,
                cum: vec![1.0],
            });
        }
        let h = widest / cells_per_law as f64;
        let mut pmf = vec![1.0];
        let mut n_cells = 0usize;
        for l in laws {
            let (a, b) = l.support();
            origin += a;
            if b == a {
                continue;
            }
            let n = ((b - a) / h).ceil() as usize;
            let mut masses = Vec::with_capacity(n);
            let mut prev = 0.0;
            for k in 0..n {
                let next = if k + 1 == n {
                    1.0
                } else {
                    l.cdf(a + (k + 1) as f64 * h)
                };
                masses.push((next - prev).max(0.0));
                prev = next;
            }
            n_cells += 1;
            let mut out = vec![0.0; pmf.len() + n - 1];
            for (x, px) in pmf.iter().enumerate() {
                if *px == 0.0 {
                    continue;
                }
                for (y, my) in masses.iter().enumerate() {
                    out[x + y] += px * my;
                }
            }
            pmf = out;
        }
        origin += 0.5 * n_cells as f64 * h - 0.5 * h;
        let mut cum = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in pmf {
            acc += p;
            cum.push(acc);
        }
        let total = acc;
        for c in &mut cum {
            *c /= total;
        }
        Ok(Self { origin, h, cum })
    }

    /// Piecewise-linear CDF; each atom is spread uniformly over its cell.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.h == 0.0 {
            return if x >= self.origin { 1.0 } else { 0.0 };
        }
        let t = (x - self.origin) / self.h;
        if t <= 0.0 {
            return 0.0;
        }
        let k = t.floor() as usize;
        if k >= self.cum.len() {
            return 1.0;
        }
        let below = if k == 0 { 0.0 } else { self.cum[k - 1] };
        below + (t - k as f64) * (self.cum[k] - below)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if self.h == 0.0 {
            return self.origin;
        }
        let p = p.clamp(0.0, 1.0);
        let k = self.cum.partition_point(|&c| c < p).min(self.cum.len() - 1);
        let below = if k == 0 { 0.0 } else { self.cum[k - 1] };
        let width = self.cum[k] - below;
        let frac = if width > 0.0 {
            (p - below) / width
        } else {
            0.0
        };
        self.origin + (k as f64 + frac) * self.h
    }

    pub fn mean(&self) -> f64 {
        let mut prev = 0.0;
        let mut m = 0.0;
        for (k, c) in self.cum.iter().enumerate() {
            m += (c - prev) * (self.origin + (k as f64 + 0.5) * self.h);
            prev = *c;
        }
        m
    }
}
