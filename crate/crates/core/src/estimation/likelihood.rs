//! Log-likelihood of a detrended panel under the parametric specification.
//!
//! Prices and outputs are an affine, unit-determinant image of the demand
//! shock `u` and the scaled total costs `ṽ_i = W/D + V_i/(λ+2β)`:
//! `u = p + β Σ q_i` and `ṽ_i = u/D + h_i - q_i`. Given `u`, the `ṽ_i` share
//! the common term `W̃ = W/D`, which is integrated out numerically.

use nalgebra::DMatrix;
use statrs::function::beta::{beta_reg, ln_beta};

use crate::distributions::{TruncNormal, Univariate};
use crate::error::Result;
use crate::panel::Panel;
use crate::quadrature::GaussLegendre;
use crate::theta::ThetaParam;

/// Contribution of a market whose observables the parameters cannot generate.
pub const INFEASIBLE_BASE: f64 = -1.0e4;
/// Additional penalty per unit of support violation.
pub const INFEASIBLE_SLOPE: f64 = 1.0e6;

#[derive(Debug, Clone, PartialEq)]
pub struct LogLik {
    /// Sum over markets, with penalties for infeasible ones.
    pub value: f64,
    pub infeasible: usize,
}

impl LogLik {
    pub fn feasible(&self) -> bool {
        self.infeasible == 0
    }
}

// Log density of a truncated Beta on the unit interval, with its
// normalising constant folded into `c`.
#[derive(Clone, Copy)]
struct UnitBeta {
    am1: f64,
    bm1: f64,
    c: f64,
}

impl UnitBeta {
    fn new(a: f64, b: f64, lo: f64, hi: f64) -> Self {
        let mass = if lo > 0.0 || hi < 1.0 {
            beta_reg(a, b, hi) - beta_reg(a, b, lo)
        } else {
            1.0
        };
        Self {
            am1: a - 1.0,
            bm1: b - 1.0,
            c: -ln_beta(a, b) - mass.ln(),
        }
    }

    #[inline]
    fn ln_pdf(&self, y: f64) -> f64 {
        self.c + self.am1 * y.ln() + self.bm1 * (1.0 - y).ln()
    }
}

/// Quantities that depend on θ but not on the data.
pub struct Prepared {
    beta: f64,
    inv_d: f64,
    own: f64,
    u_law: TruncNormal,
    u_scale: f64,
    w_bar: f64,
    a1: f64,
    a2: f64,
    lo: f64,
    hi: f64,
    h: Vec<f64>,
    firm_group: Vec<usize>,
    groups: Vec<UnitBeta>,
    // Ṽ_i support bounds and the common W̃ support bounds.
    x_lo: f64,
    x_hi: f64,
    wt_lo: f64,
    wt_hi: f64,
}

impl Prepared {
    pub fn new(theta: &ThetaParam) -> Result<Self> {
        theta.validate()?;
        let n = theta.n_firms() as f64;
        let beta = theta.beta;
        let lambda = theta.lambda;
        let d = lambda + (n + 1.0) * beta;
        let own = lambda + 2.0 * beta;
        let (lo, hi) = theta.truncation.unwrap_or((0.0, 1.0));
        let model = theta.model()?;
        let mu: Vec<f64> = model.v_laws.iter().map(|l| l.mean()).collect();
        let total: f64 = mu.iter().sum();
        let h = mu
            .iter()
            .map(|&m| {
                let a = ((lambda + n * beta) * m - beta * (total - m)) / (lambda + beta);
                -a / d + m / own
            })
            .collect();
        let u_law = TruncNormal::new(
            theta.mu_u,
            theta.sigma2_u.sqrt(),
            theta.u_lower,
            f64::INFINITY,
        )?;
        Ok(Self {
            beta,
            inv_d: 1.0 / d,
            own,
            u_law,
            u_scale: theta.sigma2_u.sqrt(),
            w_bar: theta.w_bar,
            a1: theta.a_tilde1,
            a2: theta.a_tilde2,
            lo,
            hi,
            h,
            firm_group: theta.firm_group.clone(),
            groups: theta
                .groups
                .iter()
                .map(|g| UnitBeta::new(g.a, g.b, lo, hi))
                .collect(),
            x_lo: theta.w_bar * (1.0 + lo) / own,
            x_hi: theta.w_bar * (1.0 + hi) / own,
            wt_lo: theta.w_bar * (2.0 * lo - 1.0) / d,
            wt_hi: theta.w_bar * (2.0 * hi - 1.0) / d,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Scaled total cost `ṽ_i = W/D + V_i/(λ+2β)`.
    pub fn scaled_cost(&self, w: f64, v: f64) -> f64 {
        w * self.inv_d + v / self.own
    }

    /// `(u, ṽ) ↦ (p, q)`: `q_i = u/D + h_i - ṽ_i` and `p = u - βΣq_i`.
    pub fn to_observables(&self, u: f64, vt: &[f64]) -> (f64, Vec<f64>) {
        let q: Vec<f64> = vt.iter().zip(&self.h).map(|(v, h)| u * self.inv_d + h - v).collect();
        (u - self.beta * q.iter().sum::<f64>(), q)
    }

    /// Inverse of [`Prepared::to_observables`].
    pub fn to_latent(&self, p: f64, q: &[f64]) -> (f64, Vec<f64>) {
        let u = p + self.beta * q.iter().sum::<f64>();
        (u, q.iter().zip(&self.h).map(|(qi, h)| u * self.inv_d + h - qi).collect())
    }

    /// Log density of one market, or `Err(violation)` when it lies outside
    /// the support implied by θ.
    pub fn market(
        &self,
        p: f64,
        q: &[f64],
        gl: &GaussLegendre,
        vt: &mut Vec<f64>,
    ) -> std::result::Result<f64, f64> {
        let u = p + self.beta * q.iter().sum::<f64>();
        if u < self.u_law.lower {
            return Err((self.u_law.lower - u) / self.u_scale);
        }
        Ok(self.u_law.ln_density(u) + self.cost_part(u, q, gl, vt)?)
    }

    /// Log density of the outputs given the demand shock `u`: the part of
    /// the market likelihood that does not involve the law of `U`.
    pub fn cost_part(
        &self,
        u: f64,
        q: &[f64],
        gl: &GaussLegendre,
        vt: &mut Vec<f64>,
    ) -> std::result::Result<f64, f64> {
        vt.clear();
        vt.extend(
            q.iter()
                .zip(&self.h)
                .map(|(qi, hi)| u * self.inv_d + hi - qi),
        );
        let mut left = self.wt_lo;
        let mut right = self.wt_hi;
        for &v in vt.iter() {
            left = left.max(v - self.x_hi);
            right = right.min(v - self.x_lo);
        }
        if left >= right {
            return Err(left - right);
        }
        let aw = (self.a1 + self.a2 * u).exp();
        let wb = UnitBeta::new(aw, aw, self.lo, self.hi);
        // Jacobians of B ↦ W̃ and B ↦ Ṽ_i.
        let ln_jac =
            (0.5 / (self.w_bar * self.inv_d)).ln() + vt.len() as f64 * (self.own / self.w_bar).ln();
        let half = 0.5 * (right - left);
        let mid = 0.5 * (right + left);
        let mut best = f64::NEG_INFINITY;
        let mut terms = [0.0f64; 128];
        let n_nodes = gl.len();
        let mut s_buf;
        let terms: &mut [f64] = if n_nodes <= 128 {
            &mut terms[..n_nodes]
        } else {
            s_buf = vec![0.0; n_nodes];
            &mut s_buf[..]
        };
        let k_w = 0.5 / (self.w_bar * self.inv_d);
        let k_v = self.own / self.w_bar;
        for (k, &x) in gl.nodes.iter().enumerate() {
            let wt = mid + half * x;
            let yw = (wt * k_w + 0.5).clamp(self.lo, self.hi);
            let mut s = wb.ln_pdf(yw);
            for (v, &g) in vt.iter().zip(&self.firm_group) {
                let y = ((v - wt) * k_v - 1.0).clamp(self.lo, self.hi);
                s += self.groups[g].ln_pdf(y);
            }
            terms[k] = s;
            best = best.max(s);
        }
        if !best.is_finite() {
            return Err(0.0);
        }
        let sum: f64 = terms
            .iter()
            .zip(&gl.weights)
            .map(|(s, w)| w * (s - best).exp())
            .sum();
        Ok(best + (half * sum).ln() + ln_jac)
    }
}

/// Jacobian of `(u, ṽ_1, …, ṽ_I) ↦ (p, q_1, …, q_I)`. Adding `β` times
/// every output row to the price row leaves `(1, 0, …, 0)`, so the
/// determinant is `(-1)^I` whatever `(λ, β)`: the map preserves volume and
/// the likelihood needs no Jacobian term for it.
pub fn observation_jacobian(beta: f64, lambda: f64, n_firms: usize) -> DMatrix<f64> {
    let d = lambda + (n_firms as f64 + 1.0) * beta;
    let n = n_firms + 1;
    let mut j = DMatrix::zeros(n, n);
    j[(0, 0)] = 1.0 - beta * n_firms as f64 / d;
    for i in 1..n {
        j[(0, i)] = beta;
        j[(i, 0)] = 1.0 / d;
        j[(i, i)] = -1.0;
    }
    j
}

pub fn log_likelihood(theta: &ThetaParam, panel: &Panel, gl: &GaussLegendre) -> Result<LogLik> {
    let prep = Prepared::new(theta)?;
    Ok(log_likelihood_prepared(&prep, panel, gl))
}

pub fn log_likelihood_prepared(prep: &Prepared, panel: &Panel, gl: &GaussLegendre) -> LogLik {
    let mut value = 0.0;
    let mut infeasible = 0;
    let mut vt = Vec::with_capacity(panel.n_firms());
    for (p, q) in panel.p.iter().zip(&panel.q) {
        match prep.market(*p, q, gl, &mut vt) {
            Ok(l) => value += l,
            Err(viol) => {
                infeasible += 1;
                value += INFEASIBLE_BASE - INFEASIBLE_SLOPE * viol;
            }
        }
    }
    LogLik { value, infeasible }
}
