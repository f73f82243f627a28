//! Parametric specification of the shocks and the structural model it implies.
//!
//! * demand shock `U ~ N(μ_U, σ²_U)` truncated to `[u̲, ∞)`;
//! * common cost shock `W | U = u ~ w̄ (2 B - 1)`, `B ~ Beta(a_w(u), a_w(u))`,
//!   `a_w(u) = exp(ã₁ + ã₂ u)`;
//! * private cost of a firm in group `g`: `V ~ w̄ (B + 1)`, `B ~ Beta(a_g, b_g)`.
//!
//! Beta draws may be truncated to a common sub-interval of `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::distributions::{Law, ScaledBeta, TruncNormal, Univariate};
use crate::error::{invalid, Result};
use crate::model::ModelPrimitives;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostShape {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaParam {
    pub beta: f64,
    pub lambda: f64,
    pub u_lower: f64,
    pub mu_u: f64,
    pub sigma2_u: f64,
    pub w_bar: f64,
    pub a_tilde1: f64,
    pub a_tilde2: f64,
    pub groups: Vec<CostShape>,
    /// Group index of each firm.
    pub firm_group: Vec<usize>,
    #[serde(default)]
    pub truncation: Option<(f64, f64)>,
}

pub const COMMON_PARAM_NAMES: [&str; 8] = [
    "beta", "lambda", "u_lower", "mu_u", "sigma2_u", "w_bar", "a_tilde1", "a_tilde2",
];

impl ThetaParam {
    /// Twenty firms in two groups of ten, the design used for the Monte Carlo
    /// study.
    pub fn mc_design() -> Self {
        Self {
            beta: 0.5,
            lambda: 0.03,
            u_lower: 200.0,
            mu_u: 300.0,
            sigma2_u: 800.0,
            w_bar: 5.0,
            a_tilde1: 0.001,
            a_tilde2: 0.001,
            groups: vec![CostShape { a: 0.6, b: 0.6 }, CostShape { a: 0.8, b: 0.9 }],
            firm_group: (0..20).map(|i| i / 10).collect(),
            truncation: Some((0.025, 0.975)),
        }
    }

    pub fn n_firms(&self) -> usize {
        self.firm_group.len()
    }

    pub fn n_params(&self) -> usize {
        COMMON_PARAM_NAMES.len() + 2 * self.groups.len()
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = COMMON_PARAM_NAMES.iter().map(|s| s.to_string()).collect();
        for g in 0..self.groups.len() {
            v.push(format!("a_{}", g + 1));
            v.push(format!("b_{}", g + 1));
        }
        v
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![
            self.beta,
            self.lambda,
            self.u_lower,
            self.mu_u,
            self.sigma2_u,
            self.w_bar,
            self.a_tilde1,
            self.a_tilde2,
        ];
        for g in &self.groups {
            v.push(g.a);
            v.push(g.b);
        }
        v
    }

    /// Copy of `self` with the numeric parameters replaced by `x`.
    pub fn with_values(&self, x: &[f64]) -> Result<Self> {
        if x.len() != self.n_params() {
            return Err(invalid(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                x.len()
            )));
        }
        let mut t = self.clone();
        t.beta = x[0];
        t.lambda = x[1];
        t.u_lower = x[2];
        t.mu_u = x[3];
        t.sigma2_u = x[4];
        t.w_bar = x[5];
        t.a_tilde1 = x[6];
        t.a_tilde2 = x[7];
        for (g, shape) in t.groups.iter_mut().enumerate() {
            shape.a = x[8 + 2 * g];
            shape.b = x[9 + 2 * g];
        }
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.firm_group.is_empty() {
            return Err(invalid("no firms"));
        }
        if let Some(&g) = self.firm_group.iter().find(|&&g| g >= self.groups.len()) {
            return Err(invalid(format!("firm assigned to unknown group {g}")));
        }
        if !(self.beta > 0.0 && self.lambda >= 0.0 && self.sigma2_u > 0.0 && self.w_bar > 0.0) {
            return Err(invalid(
                "need beta > 0, lambda >= 0, sigma2_u > 0, w_bar > 0",
            ));
        }
        if self.groups.iter().any(|g| !(g.a > 0.0 && g.b > 0.0)) {
            return Err(invalid("cost shapes must be positive"));
        }
        if let Some((lo, hi)) = self.truncation {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(invalid("truncation must lie inside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<StructuralModel> {
        self.validate()?;
        let u = TruncNormal::new(self.mu_u, self.sigma2_u.sqrt(), self.u_lower, f64::INFINITY)?;
        let group_laws = self
            .groups
            .iter()
            .map(|g| {
                ScaledBeta::new(g.a, g.b, self.truncation, self.w_bar, self.w_bar).map(Law::Beta)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StructuralModel {
            beta: self.beta,
            lambda: self.lambda,
            u_law: Law::Normal(u),
            w_shock: WShock {
                w_bar: self.w_bar,
                a1: self.a_tilde1,
                a2: self.a_tilde2,
                truncation: self.truncation,
            },
            v_laws: self
                .firm_group
                .iter()
                .map(|&g| group_laws[g].clone())
                .collect(),
        })
    }
}

/// `W | U = u ~ w̄ (2 B - 1)` with `B ~ Beta(a_w(u), a_w(u))`; a point mass
/// at zero when `w̄ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WShock {
    pub w_bar: f64,
    pub a1: f64,
    pub a2: f64,
    #[serde(default)]
    pub truncation: Option<(f64, f64)>,
}

impl WShock {
    pub fn shape(&self, u: f64) -> f64 {
        (self.a1 + self.a2 * u).exp()
    }

    pub fn given(&self, u: f64) -> Result<Law> {
        if self.w_bar == 0.0 {
            return Ok(Law::Point(0.0));
        }
        let a = self.shape(u);
        Ok(Law::Beta(ScaledBeta::new(
            a,
            a,
            self.truncation,
            2.0 * self.w_bar,
            -self.w_bar,
        )?))
    }

    pub fn bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.truncation.unwrap_or((0.0, 1.0));
        (self.w_bar * (2.0 * lo - 1.0), self.w_bar * (2.0 * hi - 1.0))
    }
}

/// Fully specified data generating process: demand and cost slopes plus the
/// joint law of `(U, W, V_1, …, V_I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    pub beta: f64,
    pub lambda: f64,
    pub u_law: Law,
    pub w_shock: WShock,
    pub v_laws: Vec<Law>,
}

impl StructuralModel {
    pub fn n_firms(&self) -> usize {
        self.v_laws.len()
    }

    /// Two firms whose shocks all carry visible mass near the corner that
    /// produces a firm's lowest output: `U - 80 ~ 200 · Beta(0.3, 1)`,
    /// `W ~ 0.2 (2 Beta(0.3, 0.3) - 1)` and `V_i - 10 ~ 40 · Beta(0.3, 0.3)`,
    /// with `β = 0.5` and `λ = 0.03`. Boundary bands of a few hundred markets
    /// then localize the conditioning events well, which the Monte Carlo
    /// design (demand floor 3.5 standard deviations below the mean) does not.
    pub fn boundary_design() -> Self {
        let v = Law::Beta(ScaledBeta::new(0.3, 0.3, None, 40.0, 10.0).expect("valid shape"));
        Self {
            beta: 0.5,
            lambda: 0.03,
            u_law: Law::Beta(ScaledBeta::new(0.3, 1.0, None, 200.0, 80.0).expect("valid shape")),
            w_shock: WShock {
                w_bar: 0.2,
                a1: 0.3f64.ln(),
                a2: 0.0,
                truncation: None,
            },
            v_laws: vec![v.clone(), v],
        }
    }

    pub fn primitives(&self) -> ModelPrimitives {
        ModelPrimitives {
            beta: self.beta,
            lambda: self.lambda,
            mu_v: self.v_laws.iter().map(|l| l.mean()).collect(),
            v_bounds: self.v_laws.iter().map(|l| l.support()).collect(),
            w_bounds: self.w_shock.bounds(),
            u_lower: self.u_law.support().0,
        }
    }
}
