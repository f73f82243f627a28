//! First and second moments of the observables `(P, Q_1, …, Q_I)`, and the
//! moment-based steps of the identification argument (`λ` and the `μ_{V_i}`).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::{Law, Univariate};
use crate::error::{invalid, Error, Result};
use crate::model::{LinearEquilibrium, PriceFloorPolicy};
use crate::panel::Panel;
use crate::quadrature::GaussLegendre;
use crate::theta::StructuralModel;

/// Mean vector and covariance matrix of `(P, Q_1, …, Q_I)`.
#[derive(Debug, Clone)]
pub struct ObservableMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl ObservableMoments {
    pub fn n_firms(&self) -> usize {
        self.mean.len() - 1
    }

    /// Sample moments (covariances with divisor `T - 1`).
    pub fn from_panel(panel: &Panel) -> Result<Self> {
        let t = panel.len();
        if t < 2 {
            return Err(Error::InsufficientData(format!("{t} rows")));
        }
        let k = panel.n_firms() + 1;
        let mut x = DMatrix::zeros(t, k);
        for r in 0..t {
            x[(r, 0)] = panel.p[r];
            for i in 0..k - 1 {
                x[(r, i + 1)] = panel.q[r][i];
            }
        }
        let mean = DVector::from_iterator(k, (0..k).map(|c| x.column(c).mean()));
        for c in 0..k {
            let m = mean[c];
            x.column_mut(c).add_scalar_mut(-m);
        }
        let cov = x.transpose() * &x / (t as f64 - 1.0);
        Ok(Self { mean, cov })
    }

    /// Exact moments implied by a structural model. Terms involving the
    /// common shock are integrated against the law of `U` by Gauss–Legendre.
    pub fn population(model: &StructuralModel) -> Result<Self> {
        let prim = model.primitives();
        let eq = LinearEquilibrium::with_policy(&prim, PriceFloorPolicy::CheckRealized)?;
        let n = prim.n_firms();
        let (beta, d, own) = (prim.beta, prim.big_d(), prim.own_slope());

        let eu = model.u_law.mean();
        let var_u = model.u_law.variance();
        let [ew, ew2, euw] = integrate_over_u(&model.u_law, |u| {
            let w = model.w_shock.given(u)?;
            let m = w.mean();
            Ok([m, w.variance() + m * m, u * m])
        })?;
        let var_w = ew2 - ew * ew;
        let cov_uw = euw - eu * ew;
        // Z = U - W drives every quantity.
        let var_z = var_u + var_w - 2.0 * cov_uw;
        let cov_uz = var_u - cov_uw;

        let mut mean = DVector::zeros(n + 1);
        let mut cov = DMatrix::zeros(n + 1, n + 1);
        let a = eq.a_coefs();
        for i in 0..n {
            mean[i + 1] = (eu - ew - a[i]) / d;
            for j in 0..n {
                cov[(i + 1, j + 1)] = var_z / (d * d);
            }
            cov[(i + 1, i + 1)] += model.v_laws[i].variance() / (own * own);
        }
        // P = U - β Σ Q_j.
        mean[0] = eu - beta * (1..=n).map(|i| mean[i]).sum::<f64>();
        let mut var_p = var_u;
        for i in 1..=n {
            let cov_uq = cov_uz / d;
            let row: f64 = (1..=n).map(|j| cov[(i, j)]).sum();
            let c = cov_uq - beta * row;
            cov[(0, i)] = c;
            cov[(i, 0)] = c;
            var_p -= 2.0 * beta * cov_uq;
        }
        let total: f64 = (1..=n)
            .flat_map(|i| (1..=n).map(move |j| (i, j)))
            .map(|ij| cov[ij])
            .sum();
        var_p += beta * beta * total;
        cov[(0, 0)] = var_p;
        Ok(Self { mean, cov })
    }

    // Weights expressing `P + βQ⁺` as a combination of the observables.
    fn demand_weights(&self, beta: f64) -> DVector<f64> {
        let mut a = DVector::from_element(self.mean.len(), beta);
        a[0] = 1.0;
        a
    }

    pub fn mean_demand_shock(&self, beta: f64) -> f64 {
        self.demand_weights(beta).dot(&self.mean)
    }

    pub fn var_demand_shock(&self, beta: f64) -> f64 {
        let a = self.demand_weights(beta);
        a.dot(&(&self.cov * &a))
    }

    /// `cov(Q_i, P + βQ⁺)`.
    pub fn cov_quantity_demand(&self, i: usize, beta: f64) -> f64 {
        let a = self.demand_weights(beta);
        self.cov.row(i + 1).transpose().dot(&a)
    }
}

// ∫ f(u) dF_U(u) for vector-valued f.
fn integrate_over_u<const K: usize>(
    law: &Law,
    mut f: impl FnMut(f64) -> Result<[f64; K]>,
) -> Result<[f64; K]> {
    if let Law::Point(u) = law {
        return f(*u);
    }
    let (lo, hi) = law.support();
    let sd = law.variance().sqrt();
    let m = law.mean();
    let lo = if lo.is_finite() { lo } else { m - 40.0 * sd };
    let hi = if hi.is_finite() { hi } else { m + 40.0 * sd };
    let gl = GaussLegendre::new(32);
    let panels = 64;
    let h = (hi - lo) / panels as f64;
    let mut acc = [0.0; K];
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (u, w) in gl.mapped(a, a + h) {
            let dens = law.density(u);
            if dens == 0.0 {
                continue;
            }
            let v = f(u)?;
            for k in 0..K {
                acc[k] += w * dens * v[k];
            }
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub lambda: f64,
    /// `γ₁` from each firm's projection on `P + βQ⁺`.
    pub gamma1: Vec<f64>,
    pub by_firm: Vec<f64>,
}

/// `γ₁ = cov(Q_i, P + βQ⁺) / var(P + βQ⁺)` and `λ = 1/γ₁ - (I + 1)β`,
/// averaged over firms with equal weights.
pub fn identify_lambda(m: &ObservableMoments, beta: f64) -> Result<LambdaEstimate> {
    let var = m.var_demand_shock(beta);
    if !(var > 0.0) {
        return Err(invalid(format!("var(P + beta Q+) = {var} is not positive")));
    }
    let n = m.n_firms();
    let gamma1: Vec<f64> = (0..n)
        .map(|i| m.cov_quantity_demand(i, beta) / var)
        .collect();
    let by_firm: Vec<f64> = gamma1
        .iter()
        .map(|g| 1.0 / g - (n as f64 + 1.0) * beta)
        .collect();
    let lambda = by_firm.iter().sum::<f64>() / n as f64;
    Ok(LambdaEstimate {
        lambda,
        gamma1,
        by_firm,
    })
}

/// `μ_{V_i} = μ_{P+βQ⁺} - β μ_{Q⁺₋ᵢ} - (λ + 2β) μ_{Q_i}`.
pub fn identify_mu_v(m: &ObservableMoments, beta: f64, lambda: f64) -> Vec<f64> {
    let n = m.n_firms();
    let mu_u = m.mean_demand_shock(beta);
    let total: f64 = (1..=n).map(|i| m.mean[i]).sum();
    (0..n)
        .map(|i| {
            let qi = m.mean[i + 1];
            mu_u - beta * (total - qi) - (lambda + 2.0 * beta) * qi
        })
        .collect()
}
