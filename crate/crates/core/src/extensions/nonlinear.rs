//! Cournot equilibrium with privately observed costs under a nonlinear
//! inverse demand, computed as the fixed point of the best-response map on
//! per-firm strategy grids.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{stream_rng, Law, Univariate};
use crate::error::{invalid, Error, Result};
use crate::quadrature::GaussLegendre;

/// Inverse demand `p(c, u)` at total output `c` and demand level `u`.
pub trait InverseDemand: Sync {
    fn price(&self, c: f64, u: f64) -> f64;
    /// Partial derivative in `c`.
    fn d_price(&self, c: f64, u: f64) -> f64;
    /// The demand level `u` with `p(c, u) = p`.
    fn invert_u(&self, c: f64, p: f64) -> Result<f64>;
}

/// A parametric inverse demand known up to its slope `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearDemandSpec {
    /// `p = exp(u - βc)`.
    LogLinear { beta: f64 },
    /// `p = u - βc`, for checking the solver against the closed form.
    Linear { beta: f64 },
}

impl NonlinearDemandSpec {
    pub fn beta(&self) -> f64 {
        match *self {
            Self::LogLinear { beta } | Self::Linear { beta } => beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.beta();
        if !(b > 0.0 && b.is_finite()) {
            return Err(invalid(format!("demand slope {b} must be positive")));
        }
        Ok(())
    }
}

impl InverseDemand for NonlinearDemandSpec {
    fn price(&self, c: f64, u: f64) -> f64 {
        match *self {
            Self::LogLinear { beta } => (u - beta * c).exp(),
            Self::Linear { beta } => u - beta * c,
        }
    }

    fn d_price(&self, c: f64, u: f64) -> f64 {
        match *self {
            Self::LogLinear { beta } => -beta * (u - beta * c).exp(),
            Self::Linear { beta } => -beta,
        }
    }

    fn invert_u(&self, c: f64, p: f64) -> Result<f64> {
        match *self {
            Self::LogLinear { beta } => {
                if p <= 0.0 {
                    return Err(Error::OutOfSupport(format!(
                        "log of non-positive price {p}"
                    )));
                }
                Ok(p.ln() + beta * c)
            }
            Self::Linear { beta } => Ok(p + beta * c),
        }
    }
}

/// Primitives of the nonlinear-demand game. `W` is independent of `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearModel {
    pub demand: NonlinearDemandSpec,
    pub lambda: f64,
    pub v_laws: Vec<Law>,
    pub w_law: Law,
    pub u_law: Law,
}

impl NonlinearModel {
    pub fn n_firms(&self) -> usize {
        self.v_laws.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.demand.validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "cost curvature {} must be nonnegative",
                self.lambda
            )));
        }
        if self.v_laws.is_empty() {
            return Err(invalid("need at least one firm"));
        }
        for (lo, hi) in self
            .v_laws
            .iter()
            .map(|l| l.support())
            .chain([self.w_law.support(), self.u_law.support()])
        {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(invalid("shock supports must be compact"));
            }
        }
        Ok(())
    }

    /// Log-linear demand with two firms and uniform shocks:
    /// `β = 0.5`, `λ = 0.5`, `V_i ~ U[0.2, 0.8]`, `W ~ U[-0.2, 0.2]`,
    /// `U ~ U[2, 3]`.
    pub fn loglinear_fixture() -> Self {
        let uni = |lo: f64, hi: f64| {
            Law::Beta(
                crate::distributions::ScaledBeta::new(1.0, 1.0, None, hi - lo, lo)
                    .expect("valid shape"),
            )
        };
        Self {
            demand: NonlinearDemandSpec::LogLinear { beta: 0.5 },
            lambda: 0.5,
            v_laws: vec![uni(0.2, 0.8), uni(0.2, 0.8)],
            w_law: uni(-0.2, 0.2),
            u_law: uni(2.0, 3.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Nodes of the reported strategy grid over each cost support.
    pub grid_nodes: usize,
    /// Gauss–Legendre nodes per rival in quantile space.
    pub quad_nodes: usize,
    /// Rival expectations are tensorized up to this many firms; larger
    /// games use Monte Carlo draws.
    pub max_tensor_firms: usize,
    pub mc_draws: usize,
    pub mc_seed: u64,
    /// Weight on the new best response in each sweep; `None` picks
    /// `min(1, 4 / (2 + I))`.
    pub damping: Option<f64>,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_nodes: 101,
            quad_nodes: 32,
            max_tensor_firms: 4,
            mc_draws: 10_000,
            mc_seed: 0x5eed,
            damping: None,
            tol: 1e-8,
            max_sweeps: 500,
        }
    }
}

/// One firm's strategy `v ↦ q` on a grid, at fixed `(w, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyGrid {
    pub firm: usize,
    pub w: f64,
    pub u: f64,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
}

impl StrategyGrid {
    /// Linear interpolation, flat outside the grid.
    pub fn eval(&self, v: f64) -> f64 {
        interp(&self.v, &self.q, v)
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.q.windows(2).all(|w| w[1] <= w[0])
    }
}

fn interp(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    if n == 1 || t <= x[0] {
        return y[0];
    }
    if t >= x[n - 1] {
        return y[n - 1];
    }
    let k = x.partition_point(|&a| a <= t).clamp(1, n - 1);
    let (x0, x1) = (x[k - 1], x[k]);
    if x1 <= x0 {
        return y[k];
    }
    y[k - 1] + (y[k] - y[k - 1]) * (t - x0) / (x1 - x0)
}

/// Rival output totals and their probability weights.
#[derive(Debug, Clone, Default)]
struct RivalSum {
    s: Vec<f64>,
    weight: Vec<f64>,
}

impl RivalSum {
    fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.s
            .iter()
            .zip(&self.weight)
            .map(|(&s, &w)| w * f(s))
            .sum()
    }
}

/// A solved equilibrium at one `(w, u)`.
#[derive(Debug, Clone)]
pub struct NonlinearEquilibrium {
    demand: NonlinearDemandSpec,
    lambda: f64,
    pub w: f64,
    pub u: f64,
    pub grids: Vec<StrategyGrid>,
    pub sweeps: usize,
    /// Largest best-response change in the final sweep.
    pub residual: f64,
    rivals: Vec<RivalSum>,
}

/// The best reply to a rival-total law: maximizes
/// `q E[p(q + S, u)] - (v + w) q - λq²/2` over `q ≥ 0` by golden-section
/// search on a bracket, then polishes the first-order condition by
/// safeguarded regula falsi.
fn best_reply(
    demand: &NonlinearDemandSpec,
    lambda: f64,
    rivals: &RivalSum,
    cost: f64,
    u: f64,
) -> f64 {
    let foc = |q: f64| {
        rivals.expect(|s| demand.price(q + s, u) + q * demand.d_price(q + s, u)) - cost - lambda * q
    };
    if foc(0.0) <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    let mut g_hi = foc(hi);
    let mut guard = 0;
    while g_hi > 0.0 && guard < 200 {
        hi *= 2.0;
        g_hi = foc(hi);
        guard += 1;
    }
    let profit =
        |q: f64| q * rivals.expect(|s| demand.price(q + s, u)) - cost * q - 0.5 * lambda * q * q;
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (profit(x1), profit(x2));
    while b - a > 1e-6 * (1.0 + b) {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = profit(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = profit(x1);
        }
    }
    // Widen the final bracket until the first-order condition changes sign.
    let width = (b - a).max(1e-9);
    let mut lo = (a - width).max(0.0);
    let mut up = b + width;
    let (mut g_lo, mut g_up) = (foc(lo), foc(up));
    let mut k = 0;
    while !(g_lo >= 0.0 && g_up <= 0.0) && k < 60 {
        lo = (lo - width * 2f64.powi(k)).max(0.0);
        up += width * 2f64.powi(k);
        g_lo = foc(lo);
        g_up = foc(up);
        k += 1;
    }
    if !(g_lo >= 0.0 && g_up <= 0.0) {
        return 0.5 * (a + b);
    }
    let mut side = 0;
    for _ in 0..200 {
        if up - lo <= 1e-14 * (1.0 + up.abs()) {
            break;
        }
        let mut x = (lo * g_up - up * g_lo) / (g_up - g_lo);
        if !(x > lo && x < up) {
            x = 0.5 * (lo + up);
        }
        let g = foc(x);
        if g == 0.0 {
            return x;
        }
        if g > 0.0 {
            lo = x;
            g_lo = g;
            if side == 1 {
                g_up *= 0.5;
            }
            side = 1;
        } else {
            up = x;
            g_up = g;
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    0.5 * (lo + up)
}

/// Where each firm's strategy is carried during the iteration.
enum StateNodes {
    /// Gauss–Legendre nodes in quantile space; rival sums are tensor
    /// products of node values, so no interpolation is involved.
    Tensor { v: Vec<Vec<f64>>, w: Vec<f64> },
    /// The reported grid; rival values at Monte Carlo draws are
    /// interpolated.
    Draws {
        v: Vec<Vec<f64>>,
        draws: Vec<Vec<f64>>,
    },
}

fn rival_sums(nodes: &StateNodes, values: &[Vec<f64>]) -> Vec<RivalSum> {
    let n = values.len();
    (0..n)
        .map(|i| match nodes {
            StateNodes::Tensor { w, .. } => {
                let mut sum = RivalSum {
                    s: vec![0.0],
                    weight: vec![1.0],
                };
                for (j, qj) in values.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let mut next = RivalSum::default();
                    for (s, ws) in sum.s.iter().zip(&sum.weight) {
                        for (q, wq) in qj.iter().zip(w) {
                            next.s.push(s + q);
                            next.weight.push(ws * wq);
                        }
                    }
                    sum = next;
                }
                sum
            }
            StateNodes::Draws { v, draws } => {
                let m = draws.len() as f64;
                let s = draws
                    .iter()
                    .map(|d| {
                        (0..n)
                            .filter(|&j| j != i)
                            .map(|j| interp(&v[j], &values[j], d[j]))
                            .sum()
                    })
                    .collect::<Vec<f64>>();
                let weight = vec![1.0 / m; s.len()];
                RivalSum { s, weight }
            }
        })
        .collect()
}

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 || hi <= lo {
        return vec![lo; n.max(1)];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Iterates damped simultaneous best responses (Jacobi sweeps) from zero
/// output until no firm's reply moves by more than `cfg.tol`.
pub fn solve_nonlinear_equilibrium(
    model: &NonlinearModel,
    w: f64,
    u: f64,
    cfg: &SolverConfig,
) -> Result<NonlinearEquilibrium> {
    model.validate()?;
    let n = model.n_firms();
    if cfg.grid_nodes < 2 || cfg.quad_nodes < 1 {
        return Err(invalid(
            "need at least two grid nodes and one quadrature node",
        ));
    }
    let damping = cfg
        .damping
        .unwrap_or_else(|| (4.0 / (2.0 + n as f64)).min(1.0));
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(invalid(format!("damping {damping} outside (0, 1]")));
    }
    let nodes = if n <= cfg.max_tensor_firms {
        let gl = GaussLegendre::new(cfg.quad_nodes);
        let (alpha, weight): (Vec<f64>, Vec<f64>) = gl.mapped(0.0, 1.0).unzip();
        let v = model
            .v_laws
            .iter()
            .map(|l| {
                alpha
                    .iter()
                    .map(|&a| l.quantile(a))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        StateNodes::Tensor { v, w: weight }
    } else {
        let v: Vec<Vec<f64>> = model
            .v_laws
            .iter()
            .map(|l| {
                let (lo, hi) = l.support();
                uniform_grid(lo, hi, cfg.grid_nodes)
            })
            .collect();
        let mut rng = stream_rng(cfg.mc_seed, 0);
        let draws = (0..cfg.mc_draws.max(1))
            .map(|_| {
                model
                    .v_laws
                    .iter()
                    .map(|l| l.quantile(rng.random::<f64>()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        StateNodes::Draws { v, draws }
    };
    let state_v = match &nodes {
        StateNodes::Tensor { v, .. } | StateNodes::Draws { v, .. } => v.clone(),
    };

    let mut values: Vec<Vec<f64>> = state_v.iter().map(|v| vec![0.0; v.len()]).collect();
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let rivals = rival_sums(&nodes, &values);
        let replies: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                state_v[i]
                    .par_iter()
                    .map(|&v| best_reply(&model.demand, model.lambda, &rivals[i], v + w, u))
                    .collect()
            })
            .collect();
        residual = replies
            .iter()
            .zip(&values)
            .flat_map(|(r, q)| r.iter().zip(q).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        for (q, r) in values.iter_mut().zip(&replies) {
            for (a, b) in q.iter_mut().zip(r) {
                *a += damping * (b - *a);
            }
        }
        if residual < cfg.tol {
            break;
        }
    }
    if residual >= cfg.tol {
        return Err(Error::NonConvergence(format!(
            "best-response iteration stopped after {sweeps} sweeps with change {residual:.3e}"
        )));
    }
    let rivals = rival_sums(&nodes, &values);
    let grids = (0..n)
        .map(|i| {
            let (lo, hi) = model.v_laws[i].support();
            let v = uniform_grid(lo, hi, cfg.grid_nodes);
            let q = v
                .par_iter()
                .map(|&x| best_reply(&model.demand, model.lambda, &rivals[i], x + w, u))
                .collect();
            StrategyGrid {
                firm: i,
                w,
                u,
                v,
                q,
            }
        })
        .collect();
    Ok(NonlinearEquilibrium {
        demand: model.demand,
        lambda: model.lambda,
        w,
        u,
        grids,
        sweeps,
        residual,
        rivals,
    })
}

impl NonlinearEquilibrium {
    pub fn n_firms(&self) -> usize {
        self.grids.len()
    }

    /// Firm `i`'s output at cost `v`, as an exact best reply to the
    /// converged rival strategies.
    pub fn quantity(&self, i: usize, v: f64) -> f64 {
        best_reply(
            &self.demand,
            self.lambda,
            &self.rivals[i],
            v + self.w,
            self.u,
        )
    }

    /// `E[f(Q⁺₋ᵢ)]` under the rivals' equilibrium strategies.
    pub fn rival_expectation(&self, i: usize, f: impl FnMut(f64) -> f64) -> f64 {
        self.rivals[i].expect(f)
    }

    /// Support points and weights of the law of `Q⁺₋ᵢ` used by the solver.
    pub fn rival_law(&self, i: usize) -> (&[f64], &[f64]) {
        (&self.rivals[i].s, &self.rivals[i].weight)
    }

    /// Largest first-order-condition residual over the reported grids, at
    /// nodes with positive output.
    pub fn foc_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for g in &self.grids {
            for (&v, &q) in g.v.iter().zip(&g.q) {
                if q > 0.0 {
                    let mr = self.rivals[g.firm].expect(|s| {
                        self.demand.price(q + s, self.u) + q * self.demand.d_price(q + s, self.u)
                    });
                    worst = worst.max((mr - v - self.w - self.lambda * q).abs());
                }
            }
        }
        worst
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "firm,w,u,v,q")?;
        for g in &self.grids {
            for (v, q) in g.v.iter().zip(&g.q) {
                writeln!(f, "{},{},{},{v},{q}", g.firm, g.w, g.u)?;
            }
        }
        Ok(())
    }
}

/// Draws `(V, W, U)` and solves the equilibrium market by market.
pub fn simulate_nonlinear_panel(
    model: &NonlinearModel,
    t_len: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<crate::panel::Panel> {
    model.validate()?;
    let rows = (0..t_len)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let u = model.u_law.sample(&mut rng);
            let w = model.w_law.sample(&mut rng);
            let v: Vec<f64> = model.v_laws.iter().map(|l| l.sample(&mut rng)).collect();
            let eq = solve_nonlinear_equilibrium(model, w, u, cfg)?;
            let q: Vec<f64> = (0..v.len()).map(|i| eq.quantity(i, v[i])).collect();
            let p = model.demand.price(q.iter().sum(), u);
            Ok((p, q))
        })
        .collect::<Result<Vec<_>>>()?;
    let (p, q) = rows.into_iter().unzip();
    crate::panel::Panel::new(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ScaledBeta;

    fn uni(lo: f64, hi: f64) -> Law {
        Law::Beta(ScaledBeta::new(1.0, 1.0, None, hi - lo, lo).unwrap())
    }

    #[test]
    fn log_linear_demand_properties() {
        let d = NonlinearDemandSpec::LogLinear { beta: 0.5 };
        for &(c, u) in &[(0.0, 2.0), (1.0, 2.5), (4.0, 3.0)] {
            let h = 1e-6;
            assert!(d.price(c, u) > 0.0);
            assert!(d.price(c + h, u) < d.price(c, u));
            assert!(d.price(c, u + h) > d.price(c, u));
            let fd = (d.price(c + h, u) - d.price(c - h, u)) / (2.0 * h);
            assert!((fd - d.d_price(c, u)).abs() < 1e-7);
            assert!((d.invert_u(c, d.price(c, u)).unwrap() - u).abs() < 1e-12);
        }
        assert!(d.invert_u(1.0, 0.0).is_err());
    }

    #[test]
    fn monopoly_reply_solves_foc() {
        // p = 10 - q, cost 2, λ = 0: q = 4.
        let d = NonlinearDemandSpec::Linear { beta: 1.0 };
        let r = RivalSum {
            s: vec![0.0],
            weight: vec![1.0],
        };
        assert!((best_reply(&d, 0.0, &r, 2.0, 10.0) - 4.0).abs() < 1e-12);
        // Cost above the choke price: corner at zero.
        assert_eq!(best_reply(&d, 0.0, &r, 11.0, 10.0), 0.0);
    }

    #[test]
    fn interpolation_is_flat_outside() {
        let x = [0.0, 1.0, 2.0];
        let y = [3.0, 2.0, 0.0];
        assert_eq!(interp(&x, &y, -1.0), 3.0);
        assert_eq!(interp(&x, &y, 5.0), 0.0);
        assert!((interp(&x, &y, 1.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_rivals_for_large_games() {
        let m = NonlinearModel {
            demand: NonlinearDemandSpec::Linear { beta: 0.5 },
            lambda: 0.2,
            v_laws: vec![uni(0.0, 1.0); 5],
            w_law: Law::Point(0.0),
            u_law: Law::Point(20.0),
        };
        let cfg = SolverConfig {
            mc_draws: 2000,
            grid_nodes: 41,
            ..Default::default()
        };
        let eq = solve_nonlinear_equilibrium(&m, 0.0, 20.0, &cfg).unwrap();
        // Symmetric closed form: (u - μ)/(λ + (I+1)β) at v = μ.
        let want = (20.0 - 0.5) / (0.2 + 6.0 * 0.5);
        assert!((eq.quantity(0, 0.5) - want).abs() < 0.02);
    }
}
