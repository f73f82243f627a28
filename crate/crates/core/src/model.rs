//! Linear-demand Cournot game with privately observed costs.
//!
//! Inverse demand is `p = u - β Q⁺`; firm `i` pays `(v_i + w) q_i + λ q_i² / 2`.
//! `u` and `w` are common knowledge, `v_i` is private.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const SUPPORT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPrimitives {
    pub beta: f64,
    pub lambda: f64,
    /// Mean of each firm's private cost.
    pub mu_v: Vec<f64>,
    /// Support `[v_lo, v_hi]` of each firm's private cost.
    pub v_bounds: Vec<(f64, f64)>,
    /// Support of the common cost shock.
    pub w_bounds: (f64, f64),
    /// Lower bound of the demand shock support.
    pub u_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketDraw {
    pub u: f64,
    pub w: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption2Report {
    /// Lowest equilibrium price over the support; must be non-negative.
    pub price_floor: f64,
    /// Lowest equilibrium quantity of each firm; each must be non-negative.
    pub quantity_floors: Vec<f64>,
    pub holds: bool,
}

impl ModelPrimitives {
    pub fn n_firms(&self) -> usize {
        self.mu_v.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_firms();
        if n == 0 {
            return Err(invalid("at least one firm is required"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if self.v_bounds.len() != n {
            return Err(invalid("v_bounds and mu_v lengths differ"));
        }
        for (i, (&(lo, hi), &m)) in self.v_bounds.iter().zip(&self.mu_v).enumerate() {
            if !(lo <= hi) || !(lo - SUPPORT_SLACK <= m && m <= hi + SUPPORT_SLACK) {
                return Err(invalid(format!(
                    "firm {i}: mean {m} not inside cost support [{lo}, {hi}]"
                )));
            }
        }
        if !(self.w_bounds.0 <= self.w_bounds.1) {
            return Err(invalid("w_bounds must be ordered"));
        }
        if !self.u_lower.is_finite() {
            return Err(invalid("u_lower must be finite"));
        }
        Ok(())
    }

    /// `λ + (I+1)β`, the slope of expected output in `u - w`.
    pub fn big_d(&self) -> f64 {
        self.lambda + (self.n_firms() as f64 + 1.0) * self.beta
    }

    /// `λ + 2β`, the inverse slope of a firm's output in its own cost.
    pub fn own_slope(&self) -> f64 {
        self.lambda + 2.0 * self.beta
    }

    /// The intercept shifter `A_i` of the equilibrium strategy.
    pub fn a_coef(&self, i: usize) -> f64 {
        let n = self.n_firms() as f64;
        let total: f64 = self.mu_v.iter().sum();
        let others = total - self.mu_v[i];
        ((self.lambda + n * self.beta) * self.mu_v[i] - self.beta * others)
            / (self.lambda + self.beta)
    }

    /// Copy with every cost support and mean shifted by `dv[i]` and the
    /// demand floor shifted by `du`.
    pub fn shifted(&self, dv: &[f64], du: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n_firms() {
            out.mu_v[i] += dv[i];
            out.v_bounds[i].0 += dv[i];
            out.v_bounds[i].1 += dv[i];
        }
        out.u_lower += du;
        out
    }
}

pub fn check_assumption2(prim: &ModelPrimitives) -> Result<Assumption2Report> {
    prim.validate()?;
    let d = prim.big_d();
    let own = prim.own_slope();
    let (w_lo, w_hi) = prim.w_bounds;
    let mut sum = 0.0;
    let mut floors = Vec::with_capacity(prim.n_firms());
    for i in 0..prim.n_firms() {
        let a = prim.a_coef(i);
        let (v_lo, v_hi) = prim.v_bounds[i];
        sum += (v_lo - prim.mu_v[i]) / own + (w_lo + a) / d;
        floors.push((prim.u_lower - w_hi - a) / d - (v_hi - prim.mu_v[i]) / own);
    }
    let price_floor = (prim.lambda + prim.beta) * prim.u_lower / d + prim.beta * sum;
    let holds = price_floor >= 0.0 && floors.iter().all(|&q| q >= 0.0);
    Ok(Assumption2Report {
        price_floor,
        quantity_floors: floors,
        holds,
    })
}

/// How to treat primitives whose worst-case price is negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriceFloorPolicy {
    /// Reject the primitives.
    Require,
    /// Accept them as long as every firm's output floor is non-negative;
    /// callers check the prices they actually realize.
    CheckRealized,
}

/// Bayesian Nash equilibrium of the linear game, precomputed once per set of
/// primitives.
#[derive(Debug, Clone)]
pub struct LinearEquilibrium {
    prim: ModelPrimitives,
    a: Vec<f64>,
    d: f64,
    own: f64,
    report: Assumption2Report,
}

impl LinearEquilibrium {
    /// Fails with `AssumptionViolation` when some quantity or price in the
    /// support would be negative.
    pub fn new(prim: &ModelPrimitives) -> Result<Self> {
        Self::with_policy(prim, PriceFloorPolicy::Require)
    }

    pub fn with_policy(prim: &ModelPrimitives, policy: PriceFloorPolicy) -> Result<Self> {
        let report = check_assumption2(prim)?;
        let min_q = report
            .quantity_floors
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let price_ok = report.price_floor >= 0.0 || policy == PriceFloorPolicy::CheckRealized;
        if min_q < 0.0 || !price_ok {
            return Err(Error::AssumptionViolation(format!(
                "price floor {:.6}, smallest quantity floor {:.6}",
                report.price_floor, min_q
            )));
        }
        Ok(Self {
            a: (0..prim.n_firms()).map(|i| prim.a_coef(i)).collect(),
            d: prim.big_d(),
            own: prim.own_slope(),
            prim: prim.clone(),
            report,
        })
    }

    pub fn primitives(&self) -> &ModelPrimitives {
        &self.prim
    }

    pub fn report(&self) -> &Assumption2Report {
        &self.report
    }

    pub fn a_coefs(&self) -> &[f64] {
        &self.a
    }

    fn check_common(&self, w: f64, u: f64) -> Result<()> {
        let (lo, hi) = self.prim.w_bounds;
        if w < lo - SUPPORT_SLACK || w > hi + SUPPORT_SLACK {
            return Err(Error::OutOfSupport(format!("w = {w} outside [{lo}, {hi}]")));
        }
        if u < self.prim.u_lower - SUPPORT_SLACK {
            return Err(Error::OutOfSupport(format!(
                "u = {u} below support floor {}",
                self.prim.u_lower
            )));
        }
        Ok(())
    }

    fn check_private(&self, i: usize, v: f64) -> Result<()> {
        let (lo, hi) = self.prim.v_bounds[i];
        if v < lo - SUPPORT_SLACK || v > hi + SUPPORT_SLACK {
            return Err(Error::OutOfSupport(format!(
                "v_{i} = {v} outside [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    /// Expected output of firm `i` given the public shocks.
    pub fn expected_quantity(&self, i: usize, w: f64, u: f64) -> f64 {
        (u - w - self.a[i]) / self.d
    }

    /// Equilibrium output without support checks.
    #[inline]
    pub fn quantity_unchecked(&self, i: usize, v: f64, w: f64, u: f64) -> f64 {
        (u - w - self.a[i]) / self.d - (v - self.prim.mu_v[i]) / self.own
    }

    pub fn quantity(&self, i: usize, v: f64, w: f64, u: f64) -> Result<f64> {
        if i >= self.prim.n_firms() {
            return Err(invalid(format!("firm index {i} out of range")));
        }
        self.check_common(w, u)?;
        self.check_private(i, v)?;
        Ok(self.quantity_unchecked(i, v, w, u))
    }

    pub fn quantities(&self, draw: &MarketDraw) -> Result<Vec<f64>> {
        if draw.v.len() != self.prim.n_firms() {
            return Err(invalid("cost vector length differs from number of firms"));
        }
        self.check_common(draw.w, draw.u)?;
        draw.v
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                self.check_private(i, v)?;
                Ok(self.quantity_unchecked(i, v, draw.w, draw.u))
            })
            .collect()
    }

    pub fn price(&self, q: &[f64], u: f64) -> f64 {
        market_price(self.prim.beta, q, u)
    }
}

pub fn market_price(beta: f64, q: &[f64], u: f64) -> f64 {
    u - beta * q.iter().sum::<f64>()
}

/// Equilibrium output of firm `i` at cost `v` and public shocks `(w, u)`.
pub fn equilibrium_quantity(
    prim: &ModelPrimitives,
    i: usize,
    v: f64,
    w: f64,
    u: f64,
) -> Result<f64> {
    LinearEquilibrium::new(prim)?.quantity(i, v, w, u)
}

/// Complete-information Cournot outputs. Firms whose unconstrained output
/// would be negative are removed one at a time, most negative first, and
/// the rest re-solved.
pub fn complete_info_quantities(
    beta: f64,
    lambda: f64,
    v: &[f64],
    w: f64,
    u: f64,
) -> Result<Vec<f64>> {
    if !(beta > 0.0) || !(lambda >= 0.0) {
        return Err(invalid("need beta > 0 and lambda >= 0"));
    }
    let n = v.len();
    let mut active = vec![true; n];
    let mut q = vec![0.0; n];
    loop {
        let k = active.iter().filter(|&&a| a).count();
        if k == 0 {
            // Demand too weak for any firm: nobody produces.
            q.iter_mut().for_each(|x| *x = 0.0);
            break;
        }
        let vbar = v
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .map(|(x, _)| x)
            .sum::<f64>()
            / k as f64;
        let common = (u - w - vbar) / (lambda + (k as f64 + 1.0) * beta);
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            q[i] = if active[i] {
                -(v[i] - vbar) / (lambda + beta) + common
            } else {
                0.0
            };
            if active[i] && q[i] < 0.0 && worst.is_none_or(|(_, m)| q[i] < m) {
                worst = Some((i, q[i]));
            }
        }
        match worst {
            Some((i, _)) => active[i] = false,
            None => break,
        }
    }
    // Complementary slackness for the firms left out.
    let price = market_price(beta, &q, u);
    for i in 0..n {
        if !active[i] && price - v[i] - w > 1e-9 * (1.0 + price.abs()) {
            return Err(Error::NonConvergence(format!(
                "firm {i} excluded but has positive marginal profit at zero output"
            )));
        }
    }
    Ok(q)
}

/// Conjectural variation `κ_i` of each firm: 0 is Cournot, 1 collusion,
/// `1/(1-I)` price taking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductProfile {
    pub kappa: Vec<f64>,
}

impl ConductProfile {
    pub fn cournot(n: usize) -> Self {
        Self {
            kappa: vec![0.0; n],
        }
    }

    /// `ϑ_i = 1 + (I-1) κ_i`.
    pub fn theta(&self) -> Vec<f64> {
        let n = self.kappa.len() as f64;
        self.kappa.iter().map(|k| 1.0 + (n - 1.0) * k).collect()
    }

    fn slopes(&self, prim: &ModelPrimitives) -> Result<Vec<f64>> {
        let n = prim.n_firms();
        if self.kappa.len() != n {
            return Err(invalid(
                "conduct profile length differs from number of firms",
            ));
        }
        let lo = if n > 1 { 1.0 / (1.0 - n as f64) } else { 0.0 };
        self.kappa
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                if !(k >= lo - 1e-12 && k <= 1.0 + 1e-12) {
                    return Err(invalid(format!("kappa_{i} = {k} outside [{lo}, 1]")));
                }
                let s = prim.lambda + prim.beta * (n as f64 - 1.0) * k + 2.0 * prim.beta;
                if s <= 0.0 {
                    return Err(invalid(format!(
                        "firm {i}: non-positive marginal slope {s}"
                    )));
                }
                Ok(s)
            })
            .collect()
    }
}

/// Expected outputs `E[q_j | w, u]` under conduct `κ`, solving
/// `s_j m_j + β Σ_{k≠j} m_k = u - w - μ_j`.
pub fn conduct_interim_means(
    prim: &ModelPrimitives,
    conduct: &ConductProfile,
    w: f64,
    u: f64,
) -> Result<Vec<f64>> {
    prim.validate()?;
    let s = conduct.slopes(prim)?;
    let n = prim.n_firms();
    let mut a = DMatrix::from_element(n, n, prim.beta);
    for i in 0..n {
        a[(i, i)] = s[i];
    }
    let b = DVector::from_iterator(n, prim.mu_v.iter().map(|m| u - w - m));
    let lu = a.lu();
    let m = lu
        .solve(&b)
        .ok_or_else(|| Error::Singular("conduct interim system".into()))?;
    Ok(m.iter().copied().collect())
}

/// Outputs under conduct `κ` for one market.
pub fn solve_conduct_equilibrium(
    prim: &ModelPrimitives,
    conduct: &ConductProfile,
    draw: &MarketDraw,
) -> Result<Vec<f64>> {
    let m = conduct_interim_means(prim, conduct, draw.w, draw.u)?;
    let s = conduct.slopes(prim)?;
    let total: f64 = m.iter().sum();
    Ok((0..prim.n_firms())
        .map(|i| (draw.u - prim.beta * (total - m[i]) - draw.w - draw.v[i]) / s[i])
        .collect())
}
