//! Conditioning on a firm producing its lowest output: the demand slope and
//! the private-cost quantiles.

use serde::{Deserialize, Serialize};

use super::sum_law::SumLaw;
use super::{Identified, QuantileTable, Source};
use crate::distributions::Univariate;
use crate::error::{invalid, Error, Result};
use crate::model::{LinearEquilibrium, PriceFloorPolicy};
use crate::panel::Panel;
use crate::stats::{mean, quantile_type7, sorted};
use crate::theta::StructuralModel;

/// How a probability-zero conditioning event is approximated in a sample:
/// the band holds the `max(⌈percentile · T⌉, n_min)` observations closest
/// to the event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandRule {
    pub percentile: f64,
    pub n_min: usize,
}

impl Default for BandRule {
    fn default() -> Self {
        Self {
            percentile: 0.01,
            n_min: 200,
        }
    }
}

impl BandRule {
    pub fn band_size(&self, t: usize) -> Result<usize> {
        if !(self.percentile > 0.0 && self.percentile <= 1.0) {
            return Err(invalid(format!(
                "band percentile {} outside (0, 1]",
                self.percentile
            )));
        }
        let k = ((self.percentile * t as f64).ceil() as usize).max(self.n_min);
        if k > t || k < 2 {
            return Err(Error::InsufficientData(format!(
                "band needs {k} observations, panel has {t}"
            )));
        }
        Ok(k)
    }

    /// Indices of the band around the minimum of `x`, and its width `ε`.
    pub fn lower_band(&self, x: &[f64]) -> Result<(Vec<usize>, f64, f64)> {
        let k = self.band_size(x.len())?;
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.select_nth_unstable_by(k - 1, |&a, &b| x[a].total_cmp(&x[b]));
        idx.truncate(k);
        let lo = idx.iter().map(|&r| x[r]).fold(f64::INFINITY, f64::min);
        let hi = idx.iter().map(|&r| x[r]).fold(f64::NEG_INFINITY, f64::max);
        idx.sort_unstable();
        Ok((idx, lo, hi - lo))
    }

    /// Indices of the band of `x` values nearest to `centre`, and its
    /// half-width.
    pub fn centred_band(&self, x: &[f64], centre: f64) -> Result<(Vec<usize>, f64)> {
        let k = self.band_size(x.len())?;
        let mut idx: Vec<usize> = (0..x.len()).collect();
        let dist = |r: usize| (x[r] - centre).abs();
        idx.select_nth_unstable_by(k - 1, |&a, &b| dist(a).total_cmp(&dist(b)));
        idx.truncate(k);
        let eps = idx.iter().map(|&r| dist(r)).fold(0.0, f64::max);
        idx.sort_unstable();
        Ok((idx, eps))
    }
}

/// The event `{Q_i = q̲_i}`, or its sample band `{Q_i ≤ q̲_i + ε}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryEvent {
    pub firm: usize,
    pub q_floor: f64,
    /// Zero for the exact population event.
    pub epsilon: f64,
    pub n_band: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub beta: f64,
    pub event: BoundaryEvent,
}

pub(crate) fn equilibrium(model: &StructuralModel) -> Result<LinearEquilibrium> {
    LinearEquilibrium::with_policy(&model.primitives(), PriceFloorPolicy::CheckRealized)
}

pub(crate) fn sample_band(
    panel: &Panel,
    i: usize,
    rule: &BandRule,
) -> Result<(Vec<usize>, BoundaryEvent)> {
    check_firm(i, panel.n_firms())?;
    let (rows, q_floor, epsilon) = rule.lower_band(&panel.column(i))?;
    let n_band = rows.len();
    Ok((
        rows,
        BoundaryEvent {
            firm: i,
            q_floor,
            epsilon,
            n_band,
        },
    ))
}

fn check_firm(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(invalid(format!("firm {i} out of range for {n} firms")));
    }
    Ok(())
}

/// Conditional quantile functions of `P` and `Q⁺₋ᵢ` given `Q_i = q̲_i`.
enum BoundaryLaw {
    Exact {
        u_floor: f64,
        beta: f64,
        q_floor: f64,
        offset: f64,
        own: f64,
        rivals: SumLaw,
    },
    Band {
        p: Vec<f64>,
        rivals: Vec<f64>,
    },
}

impl BoundaryLaw {
    fn rival_quantile(&self, a: f64) -> f64 {
        match self {
            // Q⁺₋ᵢ = offset - S/own with S the sum of rival costs.
            BoundaryLaw::Exact {
                offset,
                own,
                rivals,
                ..
            } => offset - rivals.quantile(1.0 - a) / own,
            BoundaryLaw::Band { rivals, .. } => quantile_type7(rivals, a),
        }
    }

    fn price_quantile(&self, a: f64) -> f64 {
        match self {
            // Given the event, P = u̲ - β(q̲_i + Q⁺₋ᵢ) is decreasing in Q⁺₋ᵢ.
            BoundaryLaw::Exact {
                u_floor,
                beta,
                q_floor,
                ..
            } => u_floor - beta * (q_floor + self.rival_quantile(1.0 - a)),
            BoundaryLaw::Band { p, .. } => quantile_type7(p, a),
        }
    }
}

fn boundary_law(source: &Source, i: usize) -> Result<(BoundaryLaw, BoundaryEvent)> {
    match source {
        Source::Population(model) => {
            let n = model.n_firms();
            check_firm(i, n)?;
            if n < 2 {
                return Err(invalid("need at least two firms"));
            }
            let eq = equilibrium(model)?;
            let prim = eq.primitives();
            let (u_floor, w_top) = (prim.u_lower, prim.w_bounds.1);
            let q_floor = eq.quantity_unchecked(i, prim.v_bounds[i].1, w_top, u_floor);
            let offset: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| eq.quantity_unchecked(j, 0.0, w_top, u_floor))
                .sum();
            let laws: Vec<_> = (0..n)
                .filter(|&j| j != i)
                .map(|j| &model.v_laws[j])
                .collect();
            let rivals = SumLaw::new(&laws, 512)?;
            let law = BoundaryLaw::Exact {
                u_floor,
                beta: prim.beta,
                q_floor,
                offset,
                own: prim.own_slope(),
                rivals,
            };
            Ok((
                law,
                BoundaryEvent {
                    firm: i,
                    q_floor,
                    epsilon: 0.0,
                    n_band: 0,
                },
            ))
        }
        Source::Sample { panel, band } => {
            let (rows, event) = sample_band(panel, i, band)?;
            let p = sorted(&rows.iter().map(|&r| panel.p[r]).collect::<Vec<_>>());
            let rivals = sorted(
                &rows
                    .iter()
                    .map(|&r| panel.q[r].iter().sum::<f64>() - panel.q[r][i])
                    .collect::<Vec<_>>(),
            );
            Ok((BoundaryLaw::Band { p, rivals }, event))
        }
    }
}

/// The slope of inverse demand from two conditional quantiles of price and
/// rival output at the boundary of firm `i`:
/// `β = [F⁻¹_P(α′) - F⁻¹_P(α)] / [F⁻¹_{Q⁺₋ᵢ}(1-α) - F⁻¹_{Q⁺₋ᵢ}(1-α′)]`.
pub fn identify_beta(
    source: &Source,
    i: usize,
    alpha: f64,
    alpha_prime: f64,
) -> Result<BetaEstimate> {
    if !((0.0..=1.0).contains(&alpha) && (0.0..=1.0).contains(&alpha_prime)) || alpha == alpha_prime
    {
        return Err(invalid("need distinct quantile levels in [0, 1]"));
    }
    let (law, event) = boundary_law(source, i)?;
    let num = law.price_quantile(alpha_prime) - law.price_quantile(alpha);
    let den = law.rival_quantile(1.0 - alpha) - law.rival_quantile(1.0 - alpha_prime);
    let scale = law.rival_quantile(1.0).abs().max(1.0);
    if den.abs() <= 1e-12 * scale {
        return Err(Error::Numerical(format!(
            "rival-output quantiles at {alpha} and {alpha_prime} coincide; beta undefined"
        )));
    }
    Ok(BetaEstimate {
        beta: num / den,
        event,
    })
}

/// Recovers the quantile function of `V_i` from the law of `Q_i` given that
/// firm `j` produces its lowest output:
/// `F⁻¹_{V_i}(α) = μ_{V_i} + (λ + 2β)[μ_{Q_i|Q_j} - F⁻¹_{Q_i|Q_j}(1 - α)]`.
pub fn identify_fv(
    source: &Source,
    i: usize,
    j: usize,
    alpha: &[f64],
    id: &Identified,
) -> Result<QuantileTable> {
    if i == j {
        return Err(invalid(
            "conditioning firm must differ from the target firm",
        ));
    }
    if alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(invalid("quantile levels must lie in [0, 1]"));
    }
    let own_hat = id.lambda + 2.0 * id.beta;
    let mu_hat = *id
        .mu_v
        .get(i)
        .ok_or_else(|| invalid(format!("no mean cost for firm {i}")))?;
    let values = match source {
        Source::Population(model) => {
            check_firm(i, model.n_firms())?;
            check_firm(j, model.n_firms())?;
            let eq = equilibrium(model)?;
            let prim = eq.primitives();
            let (u_floor, w_top) = (prim.u_lower, prim.w_bounds.1);
            // Given (V_j, W, U) = (v̄_j, w̄, u̲), Q_i is an affine decreasing map of V_i.
            let law = &model.v_laws[i];
            let cond_q = |a: f64| -> Result<f64> {
                Ok(eq.quantity_unchecked(i, law.quantile(a)?, w_top, u_floor))
            };
            let cond_mean = eq.quantity_unchecked(i, law.mean(), w_top, u_floor);
            alpha
                .iter()
                .map(|&a| Ok(mu_hat + own_hat * (cond_mean - cond_q(a)?)))
                .collect::<Result<Vec<_>>>()?
        }
        Source::Sample { panel, band } => {
            check_firm(i, panel.n_firms())?;
            let (rows, _) = sample_band(panel, j, band)?;
            let qi: Vec<f64> = rows.iter().map(|&r| panel.q[r][i]).collect();
            let m = mean(&qi);
            let s = sorted(&qi);
            alpha
                .iter()
                .map(|&a| mu_hat + own_hat * (m - quantile_type7(&s, 1.0 - a)))
                .collect()
        }
    };
    Ok(QuantileTable {
        firm: i,
        alpha: alpha.to_vec(),
        values,
    })
}
