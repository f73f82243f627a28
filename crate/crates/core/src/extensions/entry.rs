//! Selective entry: firms see a signal of their cost, enter when the signal
//! is below a threshold set by the entry cost, and entrants then play the
//! linear game among themselves.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{stream_rng, Law, ScaledBeta, Univariate};
use crate::error::{invalid, Error, Result};
use crate::model::ModelPrimitives;
use crate::panel::Panel;
use crate::quadrature::GaussLegendre;

/// Joint law of a uniform signal `S` and cost `V` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalCostLaw {
    /// `V ~ lo + (hi - lo) Beta(a, b)`, independent of the signal.
    Independent { lo: f64, hi: f64, a: f64, b: f64 },
    /// `V = lo + (hi - lo) S`.
    Perfect { lo: f64, hi: f64 },
    /// `V | S = s ~ lo + (hi - lo) Beta(a0 e^{γs}, b)`; stochastically
    /// increasing in `s` for `γ ≥ 0`.
    BetaIndex {
        lo: f64,
        hi: f64,
        a0: f64,
        gamma: f64,
        b: f64,
    },
}

const GL_PANELS: usize = 8;

impl SignalCostLaw {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Self::Independent { lo, hi, .. }
            | Self::Perfect { lo, hi }
            | Self::BetaIndex { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo.is_finite() && hi > lo) {
            return Err(invalid(format!("cost support [{lo}, {hi}] is empty")));
        }
        match *self {
            Self::Independent { a, b, .. } if !(a > 0.0 && b > 0.0) => {
                Err(invalid("beta shapes must be positive"))
            }
            Self::BetaIndex { a0, gamma, b, .. } if !(a0 > 0.0 && b > 0.0 && gamma >= 0.0) => {
                Err(invalid("need positive shapes and nonnegative gamma"))
            }
            _ => Ok(()),
        }
    }

    fn given(&self, s: f64) -> Result<Law> {
        Ok(match *self {
            Self::Independent { lo, hi, a, b } => {
                Law::Beta(ScaledBeta::new(a, b, None, hi - lo, lo)?)
            }
            Self::Perfect { lo, hi } => Law::Point(lo + (hi - lo) * s.clamp(0.0, 1.0)),
            Self::BetaIndex {
                lo,
                hi,
                a0,
                gamma,
                b,
            } => Law::Beta(ScaledBeta::new(
                a0 * (gamma * s.clamp(0.0, 1.0)).exp(),
                b,
                None,
                hi - lo,
                lo,
            )?),
        })
    }

    /// `F_{V|S}(v | s)`.
    pub fn cdf_given(&self, v: f64, s: f64) -> Result<f64> {
        Ok(self.given(s)?.cdf(v))
    }

    /// `μ_{V|S}(s)`.
    pub fn mean_given(&self, s: f64) -> Result<f64> {
        Ok(self.given(s)?.mean())
    }

    /// `E[V | S ≤ s]`; the limit `μ_{V|S}(0)` at `s = 0`.
    pub fn truncated_mean(&self, s: f64) -> Result<f64> {
        let s = s.clamp(0.0, 1.0);
        if s == 0.0 {
            return self.mean_given(0.0);
        }
        match *self {
            Self::Independent { .. } => self.mean_given(0.0),
            Self::Perfect { lo, hi } => Ok(lo + 0.5 * (hi - lo) * s),
            Self::BetaIndex { .. } => {
                let gl = GaussLegendre::new(16);
                let mut err = None;
                let total = gl.integrate_composite(0.0, s, GL_PANELS, |x| {
                    self.mean_given(x).unwrap_or_else(|e| {
                        err = Some(e);
                        f64::NAN
                    })
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(total / s),
                }
            }
        }
    }

    /// `F*(v; s) = P(V ≤ v | S ≤ s)`.
    pub fn truncated_cdf(&self, v: f64, s: f64) -> Result<f64> {
        let s = s.clamp(0.0, 1.0);
        if s == 0.0 {
            return self.cdf_given(v, 0.0);
        }
        match *self {
            Self::Independent { .. } => self.cdf_given(v, 0.0),
            Self::Perfect { lo, hi } => Ok(((v - lo) / ((hi - lo) * s)).clamp(0.0, 1.0)),
            Self::BetaIndex { .. } => {
                let gl = GaussLegendre::new(16);
                let mut err = None;
                let total = gl.integrate_composite(0.0, s, GL_PANELS, |x| {
                    self.cdf_given(v, x).unwrap_or_else(|e| {
                        err = Some(e);
                        f64::NAN
                    })
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(total / s),
                }
            }
        }
    }
}

/// The entry threshold `𝔰(c)` tabulated on entry costs, interpolated
/// linearly and held flat outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdTable {
    pub c: Vec<f64>,
    pub s: Vec<f64>,
}

impl ThresholdTable {
    pub fn constant(s: f64) -> Self {
        Self {
            c: vec![0.0],
            s: vec![s],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.is_empty() || self.c.len() != self.s.len() {
            return Err(invalid("threshold table needs matching, non-empty columns"));
        }
        if self.c.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("entry costs must be strictly increasing"));
        }
        if self.s.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(invalid("thresholds must lie in [0, 1]"));
        }
        if self.s.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("threshold must be nonincreasing in the entry cost"));
        }
        Ok(())
    }

    pub fn eval(&self, c: f64) -> f64 {
        let n = self.c.len();
        if c <= self.c[0] {
            return self.s[0];
        }
        if c >= self.c[n - 1] {
            return self.s[n - 1];
        }
        let k = self.c.partition_point(|&x| x <= c);
        let t = (c - self.c[k - 1]) / (self.c[k] - self.c[k - 1]);
        self.s[k - 1] + t * (self.s[k] - self.s[k - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    pub signal_cost: SignalCostLaw,
    pub threshold: ThresholdTable,
    /// Entry costs are uniform on this interval.
    pub c_bounds: (f64, f64),
}

impl EntrySpec {
    /// Checks the table and that `F_{V|S}` is ordered in the signal on a
    /// grid of costs and signals.
    pub fn validate(&self) -> Result<()> {
        self.signal_cost.validate()?;
        self.threshold.validate()?;
        if !(self.c_bounds.1 >= self.c_bounds.0) {
            return Err(invalid("entry-cost support is empty"));
        }
        let (lo, hi) = self.signal_cost.bounds();
        for kv in 0..=20 {
            let v = lo + (hi - lo) * kv as f64 / 20.0;
            let mut prev = f64::INFINITY;
            for ks in 0..=20 {
                let f = self.signal_cost.cdf_given(v, ks as f64 / 20.0)?;
                if f > prev + 1e-12 {
                    return Err(invalid(
                        "cost law is not stochastically ordered in the signal",
                    ));
                }
                prev = f;
            }
        }
        Ok(())
    }
}

/// Latent draws for one market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryDraw {
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub w: f64,
    pub u: f64,
    pub c: f64,
}

pub fn draw_entry(
    spec: &EntrySpec,
    n_firms: usize,
    w_law: &Law,
    u_law: &Law,
    t_len: usize,
    seed: u64,
) -> Result<Vec<EntryDraw>> {
    spec.validate()?;
    (0..t_len)
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let s: Vec<f64> = (0..n_firms).map(|_| rng.random::<f64>()).collect();
            let v = s
                .iter()
                .map(|&si| {
                    let law = spec.signal_cost.given(si)?;
                    Ok(law.sample(&mut rng))
                })
                .collect::<Result<Vec<_>>>()?;
            let (c_lo, c_hi) = spec.c_bounds;
            let c = c_lo + (c_hi - c_lo) * rng.random::<f64>();
            Ok(EntryDraw {
                s,
                v,
                w: w_law.sample(&mut rng),
                u: u_law.sample(&mut rng),
                c,
            })
        })
        .collect()
}

/// Outcomes with the entry decisions that produced them.
#[derive(Debug, Clone)]
pub struct EntryPanel {
    pub panel: Panel,
    pub entry: Vec<Vec<bool>>,
    /// `E[V | S ≤ 𝔰(c)]` in each market.
    pub entrant_mean_cost: Vec<f64>,
}

impl EntryPanel {
    /// One row per market: `p`, the outputs, then the entry indicators.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let n = self.panel.n_firms();
        let head: Vec<String> = std::iter::once("p".to_string())
            .chain((1..=n).map(|i| format!("q{i}")))
            .chain((1..=n).map(|i| format!("e{i}")))
            .collect();
        writeln!(f, "{}", head.join(","))?;
        for ((p, q), e) in self.panel.p.iter().zip(&self.panel.q).zip(&self.entry) {
            let cells: Vec<String> = std::iter::once(p.to_string())
                .chain(q.iter().map(|x| x.to_string()))
                .chain(e.iter().map(|&x| u8::from(x).to_string()))
                .collect();
            writeln!(f, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Firm `i` enters when `S_i ≤ 𝔰(C)`. With `e⁺` entrants and
/// `μ̃ = E[V | S ≤ 𝔰(C)]`, an entrant produces
/// `(u - w - μ̃)/(λ + (e⁺+1)β) - (v_i - μ̃)/(λ + 2β)`; the others produce
/// nothing and `P = u - βΣq`.
pub fn selective_entry_outcomes(
    spec: &EntrySpec,
    prim: &ModelPrimitives,
    draws: &[EntryDraw],
) -> Result<EntryPanel> {
    spec.validate()?;
    let (beta, lambda) = (prim.beta, prim.lambda);
    if !(beta > 0.0 && lambda >= 0.0) {
        return Err(invalid("need β > 0 and λ ≥ 0"));
    }
    let mut p = Vec::with_capacity(draws.len());
    let mut q = Vec::with_capacity(draws.len());
    let mut entry = Vec::with_capacity(draws.len());
    let mut mu = Vec::with_capacity(draws.len());
    for d in draws {
        if d.s.len() != d.v.len() {
            return Err(invalid("signals and costs differ in length"));
        }
        let thr = spec.threshold.eval(d.c);
        let mu_t = spec.signal_cost.truncated_mean(thr)?;
        let e: Vec<bool> = d.s.iter().map(|&s| s <= thr).collect();
        let e_plus = e.iter().filter(|&&x| x).count() as f64;
        let common = (d.u - d.w - mu_t) / (lambda + (e_plus + 1.0) * beta);
        let row: Vec<f64> = e
            .iter()
            .zip(&d.v)
            .map(|(&ei, &vi)| {
                if ei {
                    common - (vi - mu_t) / (lambda + 2.0 * beta)
                } else {
                    0.0
                }
            })
            .collect();
        p.push(d.u - beta * row.iter().sum::<f64>());
        q.push(row);
        entry.push(e);
        mu.push(mu_t);
    }
    Ok(EntryPanel {
        panel: Panel::new(p, q)?,
        entry,
        entrant_mean_cost: mu,
    })
}

/// Entry probability from the entry decisions of markets sharing one value
/// of the cost shifter: the average number of entrants over `I`.
pub fn entry_frequency(entry: &[Vec<bool>]) -> Result<f64> {
    let n = entry.first().map_or(0, |r| r.len());
    if n == 0 {
        return Err(Error::InsufficientData("no markets".into()));
    }
    let total: usize = entry.iter().map(|r| r.iter().filter(|&&e| e).count()).sum();
    Ok(total as f64 / (n * entry.len()) as f64)
}

/// `F_{V|S}(v | s) = ∂/∂s [s F*(v; s)]` from truncated CDFs tabulated on an
/// increasing signal grid (`fstar[k][m]` at `s_grid[k]`, `v_grid[m]`).
/// Central differences inside the grid, one-sided at its ends; each
/// recovered CDF is clipped to `[0, 1]` and projected onto nondecreasing
/// functions of `v`.
pub fn recover_fv_given_s(
    fstar: &[Vec<f64>],
    s_grid: &[f64],
    v_grid: &[f64],
    h_max: f64,
) -> Result<Vec<Vec<f64>>> {
    let k = s_grid.len();
    if k < 2 || fstar.len() != k || fstar.iter().any(|r| r.len() != v_grid.len()) {
        return Err(invalid("need a value row for each of at least two signals"));
    }
    if s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("signal grid must be strictly increasing"));
    }
    let gap = s_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if gap > h_max {
        return Err(Error::InsufficientData(format!(
            "signal spacing {gap} exceeds {h_max}"
        )));
    }
    let g = |a: usize, m: usize| s_grid[a] * fstar[a][m];
    Ok((0..k)
        .map(|a| {
            let (lo, hi) = (a.saturating_sub(1), (a + 1).min(k - 1));
            let raw: Vec<f64> = (0..v_grid.len())
                .map(|m| ((g(hi, m) - g(lo, m)) / (s_grid[hi] - s_grid[lo])).clamp(0.0, 1.0))
                .collect();
            isotonic(&raw)
        })
        .collect())
}

/// Least-squares nondecreasing fit (pool adjacent violators).
pub fn isotonic(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &x in y {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().expect("two blocks");
            *last = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, n)| std::iter::repeat_n(v, n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic(&[0.0, 0.5, 1.0]), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn threshold_interpolates_and_checks_order() {
        let t = ThresholdTable {
            c: vec![0.0, 1.0],
            s: vec![0.8, 0.2],
        };
        assert!((t.eval(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(t.eval(2.0), 0.2);
        let bad = ThresholdTable {
            c: vec![0.0, 1.0],
            s: vec![0.2, 0.8],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn truncated_mean_under_perfect_signal() {
        let law = SignalCostLaw::Perfect { lo: 0.0, hi: 1.0 };
        assert!((law.truncated_mean(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((law.truncated_cdf(0.25, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn beta_index_truncation_by_quadrature() {
        // γ = 0 removes the dependence on the signal.
        let law = SignalCostLaw::BetaIndex {
            lo: 1.0,
            hi: 3.0,
            a0: 2.0,
            gamma: 0.0,
            b: 2.0,
        };
        assert!((law.truncated_mean(0.3).unwrap() - 2.0).abs() < 1e-12);
        assert!((law.truncated_cdf(2.0, 0.3).unwrap() - 0.5).abs() < 1e-12);
    }
}
