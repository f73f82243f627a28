//! Recovering the cost curvature and conjectural variations from how mean
//! outputs respond to the demand level.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::identification::BandRule;
use crate::model::{conduct_interim_means, ConductProfile, ModelPrimitives};
use crate::panel::Panel;
use crate::stats::mean;

/// Mean output of every firm given `U = u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMeans {
    pub u: f64,
    pub q: Vec<f64>,
}

impl ConditionalMeans {
    /// Exact means when `E[W | U] = 0`: outputs are linear in `w`, so
    /// they equal the interim means at `w = 0`.
    pub fn population(prim: &ModelPrimitives, conduct: &ConductProfile, u: f64) -> Result<Self> {
        Ok(Self {
            u,
            q: conduct_interim_means(prim, conduct, 0.0, u)?,
        })
    }

    /// Band estimate: average outputs over the markets whose recovered
    /// demand shock `p + βΣq` lies closest to `u`.
    pub fn from_panel(panel: &Panel, beta: f64, u: f64, band: &BandRule) -> Result<Self> {
        let shocks = panel.demand_shocks(beta);
        let (rows, _) = band.centred_band(&shocks, u)?;
        let q = (0..panel.n_firms())
            .map(|i| mean(&rows.iter().map(|&r| panel.q[r][i]).collect::<Vec<_>>()))
            .collect();
        Ok(Self { u, q })
    }

    fn rivals(&self, i: usize) -> f64 {
        self.q.iter().sum::<f64>() - self.q[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductEstimate {
    pub lambda: f64,
    pub kappa: Vec<f64>,
    /// Own-output slope `λ + β(I-1)κ_i + 2β` implied for each firm.
    pub slopes: Vec<f64>,
}

/// Given `κ_1`, recovers `λ` and then every other `κ_i` from the mean
/// outputs at two demand levels. Averaging the first-order condition over
/// `(V, W)` given `U = u` yields
/// `s_i μ_{Q_i|U}(u) = u - β μ_{Q⁺₋ᵢ|U}(u) - μ_{V_i}`, and differencing
/// across `u` and `u′` removes `μ_{V_i}`:
/// `s_i = [β(μ₋ᵢ(u) - μ₋ᵢ(u′)) - (u - u′)] / [μ_i(u′) - μ_i(u)]`.
pub fn identify_conduct(
    at_u: &ConditionalMeans,
    at_u_prime: &ConditionalMeans,
    beta: f64,
    kappa_1: f64,
) -> Result<ConductEstimate> {
    let n = at_u.q.len();
    if n < 2 || at_u_prime.q.len() != n {
        return Err(invalid(
            "need matching mean-output vectors for at least two firms",
        ));
    }
    if !(beta > 0.0) {
        return Err(invalid("demand slope must be positive"));
    }
    let du = at_u.u - at_u_prime.u;
    let slopes = (0..n)
        .map(|i| {
            let den = at_u_prime.q[i] - at_u.q[i];
            if den.abs() <= 1e-14 * (1.0 + at_u.q[i].abs()) || du == 0.0 {
                return Err(Error::Singular(format!(
                    "firm {i}: mean output does not move between the two demand levels"
                )));
            }
            Ok((beta * (at_u.rivals(i) - at_u_prime.rivals(i)) - du) / den)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = (n - 1) as f64;
    let lambda = slopes[0] - beta * m * kappa_1 - 2.0 * beta;
    let mut kappa = vec![kappa_1];
    kappa.extend(
        slopes[1..]
            .iter()
            .map(|s| (s - lambda - 2.0 * beta) / (beta * m)),
    );
    Ok(ConductEstimate {
        lambda,
        kappa,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prim(n: usize, lambda: f64) -> ModelPrimitives {
        ModelPrimitives {
            beta: 0.5,
            lambda,
            mu_v: (0..n).map(|i| 1.0 + 0.3 * i as f64).collect(),
            v_bounds: (0..n)
                .map(|i| (0.5 + 0.3 * i as f64, 1.5 + 0.3 * i as f64))
                .collect(),
            w_bounds: (-0.5, 0.5),
            u_lower: 20.0,
        }
    }

    #[test]
    fn recovers_three_firm_profile() {
        let p = prim(3, 0.1);
        let c = ConductProfile {
            kappa: vec![0.0, -0.1, -0.2],
        };
        let a = ConditionalMeans::population(&p, &c, 25.0).unwrap();
        let b = ConditionalMeans::population(&p, &c, 31.0).unwrap();
        let e = identify_conduct(&a, &b, 0.5, 0.0).unwrap();
        assert!((e.lambda - 0.1).abs() < 1e-10);
        for (k, want) in e.kappa.iter().zip([0.0, -0.1, -0.2]) {
            assert!((k - want).abs() < 1e-10);
        }
    }

    #[test]
    fn equal_demand_levels_are_singular() {
        let p = prim(2, 0.0);
        let c = ConductProfile::cournot(2);
        let a = ConditionalMeans::population(&p, &c, 25.0).unwrap();
        assert!(matches!(
            identify_conduct(&a, &a, 0.5, 0.0),
            Err(Error::Singular(_))
        ));
    }
}
