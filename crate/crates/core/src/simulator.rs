//! Draws latent shocks and maps them to equilibrium panels.

use serde::{Deserialize, Serialize};

use crate::distributions::{stream_rng, Univariate};
use crate::error::{invalid, Error, Result};
use crate::model::{complete_info_quantities, market_price, LinearEquilibrium, PriceFloorPolicy};
use crate::panel::{LatentDraws, Panel};
use crate::theta::StructuralModel;

/// Exponentially decaying trend: `V_it = τ_i^s e^{-τt} + V_it^dt` and
/// `U_t = τ^d e^{-τt} + U_t^dt` with `τ^d = -β/(λ+β) Σ τ_i^s`, which keeps
/// prices trend free.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendSpec {
    pub tau: f64,
    pub tau_s: Vec<f64>,
}

impl TrendSpec {
    pub fn none(n_firms: usize) -> Self {
        Self {
            tau: 0.0,
            tau_s: vec![0.0; n_firms],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tau_s.iter().all(|&s| s == 0.0)
    }

    pub fn tau_d(&self, beta: f64, lambda: f64) -> f64 {
        -beta / (lambda + beta) * self.tau_s.iter().sum::<f64>()
    }

    pub fn decay(&self, t: i64) -> f64 {
        (-self.tau * t as f64).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoRegime {
    /// Each firm observes only its own cost.
    Private,
    /// Costs are common knowledge.
    Complete,
}

#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: Panel,
    pub latent: LatentDraws,
}

/// Shocks for markets `t = 1..=t_len`. Market `t` uses stream `t` of the
/// generator keyed by `seed`, drawing `U^dt`, then `W | U^dt`, then each
/// `V_i^dt`; trends are added afterwards.
pub fn draw_latent(
    model: &StructuralModel,
    trend: &TrendSpec,
    t_len: usize,
    seed: u64,
) -> Result<LatentDraws> {
    let n = model.n_firms();
    if trend.tau_s.len() != n {
        return Err(invalid("trend needs one slope per firm"));
    }
    let tau_d = trend.tau_d(model.beta, model.lambda);
    let mut out = LatentDraws {
        u: Vec::with_capacity(t_len),
        w: Vec::with_capacity(t_len),
        v: Vec::with_capacity(t_len),
    };
    for t in 1..=t_len as i64 {
        let mut rng = stream_rng(seed, t as u64);
        let u_dt = model.u_law.sample(&mut rng);
        let w = model.w_shock.given(u_dt)?.sample(&mut rng);
        let decay = trend.decay(t);
        let v: Vec<f64> = model
            .v_laws
            .iter()
            .zip(&trend.tau_s)
            .map(|(law, s)| law.sample(&mut rng) + s * decay)
            .collect();
        out.u.push(u_dt + tau_d * decay);
        out.w.push(w);
        out.v.push(v);
    }
    Ok(out)
}

/// Equilibrium prices and outputs generated by given shocks.
pub fn outcomes(
    model: &StructuralModel,
    trend: &TrendSpec,
    latent: &LatentDraws,
    regime: InfoRegime,
) -> Result<Panel> {
    let prim = model.primitives();
    let base = LinearEquilibrium::with_policy(&prim, PriceFloorPolicy::CheckRealized)?;
    let tau_d = trend.tau_d(model.beta, model.lambda);
    let mut p = Vec::with_capacity(latent.len());
    let mut q = Vec::with_capacity(latent.len());
    for k in 0..latent.len() {
        let t = k as i64 + 1;
        let (u, w, v) = (latent.u[k], latent.w[k], &latent.v[k]);
        let row = match regime {
            InfoRegime::Private => {
                if trend.is_zero() {
                    base.quantities(&crate::model::MarketDraw { u, w, v: v.clone() })?
                } else {
                    let decay = trend.decay(t);
                    let dv: Vec<f64> = trend.tau_s.iter().map(|s| s * decay).collect();
                    let shifted = prim.shifted(&dv, tau_d * decay);
                    LinearEquilibrium::with_policy(&shifted, PriceFloorPolicy::CheckRealized)?
                        .quantities(&crate::model::MarketDraw { u, w, v: v.clone() })?
                }
            }
            InfoRegime::Complete => complete_info_quantities(model.beta, model.lambda, v, w, u)?,
        };
        let price = market_price(model.beta, &row, u);
        if price < 0.0 {
            return Err(Error::AssumptionViolation(format!(
                "market {t}: negative price {price}"
            )));
        }
        p.push(price);
        q.push(row);
    }
    Panel::new(p, q)
}

pub fn simulate_regime(
    model: &StructuralModel,
    trend: &TrendSpec,
    t_len: usize,
    seed: u64,
    regime: InfoRegime,
) -> Result<SimulatedPanel> {
    let latent = draw_latent(model, trend, t_len, seed)?;
    let panel = outcomes(model, trend, &latent, regime)?;
    Ok(SimulatedPanel { panel, latent })
}

/// Private-information panel of length `t_len`.
pub fn simulate_panel(
    model: &StructuralModel,
    trend: &TrendSpec,
    t_len: usize,
    seed: u64,
) -> Result<SimulatedPanel> {
    simulate_regime(model, trend, t_len, seed, InfoRegime::Private)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theta::ThetaParam;

    #[test]
    fn same_seed_same_panel_and_prefix_stability() {
        let m = ThetaParam::mc_design().model().unwrap();
        let tr = TrendSpec::none(20);
        let a = simulate_panel(&m, &tr, 50, 9).unwrap();
        let b = simulate_panel(&m, &tr, 80, 9).unwrap();
        assert_eq!(a.panel, b.panel.slice(0, 50));
        let c = simulate_panel(&m, &tr, 50, 10).unwrap();
        assert_ne!(a.panel.p, c.panel.p);
    }

    #[test]
    fn latent_shocks_invert_from_observables() {
        let m = ThetaParam::mc_design().model().unwrap();
        let s = simulate_panel(&m, &TrendSpec::none(20), 30, 1).unwrap();
        for (u, u_hat) in s.latent.u.iter().zip(s.panel.demand_shocks(m.beta)) {
            assert!((u - u_hat).abs() < 1e-9);
        }
    }

    #[test]
    fn trend_leaves_prices_unchanged() {
        let m = ThetaParam::mc_design().model().unwrap();
        let tr = TrendSpec {
            tau: 0.01,
            tau_s: vec![0.3; 20],
        };
        let with = simulate_panel(&m, &tr, 40, 5).unwrap();
        let without = simulate_panel(&m, &TrendSpec::none(20), 40, 5).unwrap();
        for (a, b) in with.panel.p.iter().zip(&without.panel.p) {
            assert!((a - b).abs() < 1e-9);
        }
        // Outputs shift down by τ^s e^{-τt} / (λ+β).
        let shift = 0.3 * (-0.01f64).exp() / (m.lambda + m.beta);
        assert!((without.panel.q[0][3] - with.panel.q[0][3] - shift).abs() < 1e-9);
    }
}
