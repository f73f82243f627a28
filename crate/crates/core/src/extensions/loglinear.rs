//! Identification under nonlinear (log-linear) inverse demand: the demand
//! slope and support of the demand shock from boundary quantiles, the cost
//! curvature from expected marginal revenue, and the private-cost quantiles
//! together with the technology-shock support from the two boundaries.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::nonlinear::{
    solve_nonlinear_equilibrium, InverseDemand, NonlinearDemandSpec, NonlinearEquilibrium,
    NonlinearModel, SolverConfig,
};
use crate::distributions::Univariate;
use crate::error::{invalid, Error, Result};
use crate::identification::{BandRule, QuantileTable};
use crate::panel::Panel;
use crate::quadrature::GaussLegendre;
use crate::stats::{mean, quantile_type7, sorted};

/// A nonlinear-demand model with its equilibria at the two corners
/// `(w̄, u̲)` (every firm's lowest output) and `(w̲, ū)` (highest output).
#[derive(Debug, Clone)]
pub struct NonlinearPopulation {
    pub model: NonlinearModel,
    pub solver: SolverConfig,
    pub lower: NonlinearEquilibrium,
    pub upper: NonlinearEquilibrium,
}

impl NonlinearPopulation {
    pub fn new(model: NonlinearModel, solver: SolverConfig) -> Result<Self> {
        let (w_lo, w_hi) = model.w_law.support();
        let (u_lo, u_hi) = model.u_law.support();
        let lower = solve_nonlinear_equilibrium(&model, w_hi, u_lo, &solver)?;
        let upper = solve_nonlinear_equilibrium(&model, w_lo, u_hi, &solver)?;
        Ok(Self {
            model,
            solver,
            lower,
            upper,
        })
    }
}

/// Where the joint law of `(P, Q)` comes from.
#[derive(Debug, Clone, Copy)]
pub enum NlSource<'a> {
    Population(&'a NonlinearPopulation),
    Sample { panel: &'a Panel, band: BandRule },
}

impl NlSource<'_> {
    pub fn n_firms(&self) -> usize {
        match self {
            NlSource::Population(p) => p.model.n_firms(),
            NlSource::Sample { panel, .. } => panel.n_firms(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    /// `Q_i = q̲_i`, reached at `(v̄_i, w̄, u̲)`.
    Lower,
    /// `Q_i = q̄_i`, reached at `(v̲_i, w̲, ū)`.
    Upper,
}

/// The law of `(P, Q⁺₋ᵢ)` given that firm `i` sits at one edge.
enum EdgeLaw<'a> {
    Exact {
        eq: &'a NonlinearEquilibrium,
        model: &'a NonlinearModel,
        i: usize,
        q_edge: f64,
        u_edge: f64,
        rivals: Vec<f64>,
    },
    Band {
        q_edge: f64,
        p: Vec<f64>,
        rivals: Vec<f64>,
        rivals_unsorted: Vec<f64>,
    },
}

const DISCRETE_POINTS: f64 = 2e5;

impl<'a> EdgeLaw<'a> {
    fn new(source: &NlSource<'a>, i: usize, edge: Edge) -> Result<Self> {
        let n = source.n_firms();
        if i >= n || n < 2 {
            return Err(invalid(format!(
                "firm {i} out of range for {n} firms (need at least two)"
            )));
        }
        match *source {
            NlSource::Population(pop) => {
                let (eq, v_edge) = match edge {
                    Edge::Lower => (&pop.lower, pop.model.v_laws[i].support().1),
                    Edge::Upper => (&pop.upper, pop.model.v_laws[i].support().0),
                };
                let q_edge = eq.quantity(i, v_edge);
                // Two firms: the rival total is the single rival's output and
                // its quantiles come straight from the strategy. Otherwise the
                // total's law is tabulated from midpoint cells.
                let rivals = if n == 2 {
                    Vec::new()
                } else {
                    let cells = (DISCRETE_POINTS.powf(1.0 / (n - 1) as f64) as usize).max(8);
                    let mut sums = vec![0.0];
                    for j in (0..n).filter(|&j| j != i) {
                        let qj = (0..cells)
                            .map(|k| {
                                Ok(eq.quantity(
                                    j,
                                    pop.model.v_laws[j]
                                        .quantile((k as f64 + 0.5) / cells as f64)?,
                                ))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        sums = sums
                            .iter()
                            .flat_map(|s| qj.iter().map(move |q| s + q))
                            .collect();
                    }
                    sorted(&sums)
                };
                Ok(EdgeLaw::Exact {
                    eq,
                    model: &pop.model,
                    i,
                    q_edge,
                    u_edge: eq.u,
                    rivals,
                })
            }
            NlSource::Sample { panel, band } => {
                let x: Vec<f64> = match edge {
                    Edge::Lower => panel.column(i),
                    Edge::Upper => panel.column(i).iter().map(|q| -q).collect(),
                };
                let (rows, floor, _) = band.lower_band(&x)?;
                let q_edge = if edge == Edge::Lower { floor } else { -floor };
                let rivals_unsorted: Vec<f64> = rows
                    .iter()
                    .map(|&r| panel.q[r].iter().sum::<f64>() - panel.q[r][i])
                    .collect();
                let p = sorted(&rows.iter().map(|&r| panel.p[r]).collect::<Vec<_>>());
                Ok(EdgeLaw::Band {
                    q_edge,
                    p,
                    rivals: sorted(&rivals_unsorted),
                    rivals_unsorted,
                })
            }
        }
    }

    fn q_edge(&self) -> f64 {
        match self {
            EdgeLaw::Exact { q_edge, .. } | EdgeLaw::Band { q_edge, .. } => *q_edge,
        }
    }

    fn rival_quantile(&self, a: f64) -> Result<f64> {
        match self {
            EdgeLaw::Exact {
                eq,
                model,
                i,
                rivals,
                ..
            } => {
                if rivals.is_empty() {
                    let j = 1 - i;
                    // Output falls with cost, so upper quantiles of output
                    // come from lower quantiles of cost.
                    Ok(eq.quantity(j, model.v_laws[j].quantile(1.0 - a)?))
                } else {
                    Ok(quantile_type7(rivals, a))
                }
            }
            EdgeLaw::Band { rivals, .. } => Ok(quantile_type7(rivals, a)),
        }
    }

    fn price_quantile(&self, a: f64) -> Result<f64> {
        match self {
            // Price falls with rival output at the edge.
            EdgeLaw::Exact {
                model,
                q_edge,
                u_edge,
                ..
            } => Ok(model
                .demand
                .price(q_edge + self.rival_quantile(1.0 - a)?, *u_edge)),
            EdgeLaw::Band { p, .. } => Ok(quantile_type7(p, a)),
        }
    }

    fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        match self {
            EdgeLaw::Exact { eq, i, .. } => eq.rival_expectation(*i, f),
            EdgeLaw::Band {
                rivals_unsorted, ..
            } => rivals_unsorted.iter().map(|&s| f(s)).sum::<f64>() / rivals_unsorted.len() as f64,
        }
    }
}

/// One evaluation of the slope formula.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeProbe {
    pub firm: usize,
    pub edge: Edge,
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogLinearDemandId {
    pub beta: f64,
    pub u_lower: f64,
    pub u_upper: f64,
    pub probes: Vec<SlopeProbe>,
    /// `(max - min) / |mean|` of the slope over all probes. The slope is
    /// over-identified, so a large value signals that demand is not
    /// log-linear.
    pub dispersion: f64,
}

/// Quantile pairs used to over-identify the slope.
pub const DEFAULT_ALPHA_PAIRS: [(f64, f64); 3] = [(0.1, 0.9), (0.25, 0.75), (0.4, 0.6)];

/// Log-linear demand at an edge: `log F⁻¹_P(α) = u - β(q_edge + F⁻¹_{Q⁺₋ᵢ}(1-α))`,
/// so two quantile levels give
/// `β = [log F⁻¹_P(α′) - log F⁻¹_P(α)] / [F⁻¹_{Q⁺₋ᵢ}(1-α) - F⁻¹_{Q⁺₋ᵢ}(1-α′)]`
/// and the edge demand level follows from either one.
pub fn identify_loglinear(
    source: &NlSource,
    alpha_pairs: &[(f64, f64)],
) -> Result<LogLinearDemandId> {
    if alpha_pairs.is_empty() {
        return Err(invalid("need at least one quantile pair"));
    }
    let n = source.n_firms();
    let mut probes = Vec::new();
    let mut laws = Vec::new();
    for edge in [Edge::Lower, Edge::Upper] {
        for i in 0..n {
            let law = EdgeLaw::new(source, i, edge)?;
            for &(a, ap) in alpha_pairs {
                if !((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&ap)) || a == ap {
                    return Err(invalid("need distinct quantile levels in [0, 1]"));
                }
                let (pa, pap) = (law.price_quantile(a)?, law.price_quantile(ap)?);
                if pa <= 0.0 || pap <= 0.0 {
                    return Err(Error::OutOfSupport(format!(
                        "non-positive price quantile at firm {i}"
                    )));
                }
                let den = law.rival_quantile(1.0 - a)? - law.rival_quantile(1.0 - ap)?;
                if den.abs() < 1e-12 {
                    return Err(Error::Numerical(format!(
                        "firm {i}: rival-output quantiles coincide"
                    )));
                }
                probes.push(SlopeProbe {
                    firm: i,
                    edge,
                    alpha: a,
                    alpha_prime: ap,
                    beta: (pap.ln() - pa.ln()) / den,
                });
            }
            laws.push((edge, law));
        }
    }
    let betas: Vec<f64> = probes.iter().map(|p| p.beta).collect();
    let beta = mean(&betas);
    let spread = betas.iter().fold(f64::NEG_INFINITY, |m, &b| m.max(b))
        - betas.iter().fold(f64::INFINITY, |m, &b| m.min(b));
    let mut u_lo = Vec::new();
    let mut u_hi = Vec::new();
    for (edge, law) in &laws {
        for &(a, _) in alpha_pairs {
            let u = law.price_quantile(a)?.ln()
                + beta * (law.q_edge() + law.rival_quantile(1.0 - a)?);
            match edge {
                Edge::Lower => u_lo.push(u),
                Edge::Upper => u_hi.push(u),
            }
        }
    }
    Ok(LogLinearDemandId {
        beta,
        u_lower: mean(&u_lo),
        u_upper: mean(&u_hi),
        probes,
        dispersion: spread / beta.abs(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonlinearLambda {
    pub lambda: f64,
    pub by_firm: Vec<f64>,
    pub mu_v: Vec<f64>,
    pub u: f64,
    pub u_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaConfig {
    /// Demand levels to difference; `None` takes the quartiles of the demand
    /// shock.
    pub u_pair: Option<(f64, f64)>,
    /// Population mode: quadrature nodes over `W` and over `U`.
    pub w_nodes: usize,
    pub u_nodes: usize,
    pub band: BandRule,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        Self {
            u_pair: None,
            w_nodes: 12,
            u_nodes: 8,
            band: BandRule::default(),
        }
    }
}

/// `E[Q_i ∂p(Q⁺, U) + p(Q⁺, U) | U = u]` and `E[Q_i | U = u]` for every firm,
/// integrating `W` and the costs by quadrature in quantile space.
fn population_revenue(
    pop: &NonlinearPopulation,
    u: f64,
    w_nodes: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = &pop.model;
    let n = m.n_firms();
    let gw = GaussLegendre::new(w_nodes.max(1));
    let gv = GaussLegendre::new(pop.solver.quad_nodes.max(1));
    let mut mr = vec![0.0; n];
    let mut q = vec![0.0; n];
    for (a, wa) in gw.mapped(0.0, 1.0) {
        let w = m.w_law.quantile(a)?;
        let eq = solve_nonlinear_equilibrium(m, w, u, &pop.solver)?;
        for i in 0..n {
            for (b, wb) in gv.mapped(0.0, 1.0) {
                let qi = eq.quantity(i, m.v_laws[i].quantile(b)?);
                let r = eq.rival_expectation(i, |s| {
                    qi * m.demand.d_price(qi + s, u) + m.demand.price(qi + s, u)
                });
                mr[i] += wa * wb * r;
                q[i] += wa * wb * qi;
            }
        }
    }
    Ok((mr, q))
}

/// Marginal revenue `Q_i ∂p(Q⁺, U) + P` and demand shocks of each market.
fn sample_revenue(
    panel: &Panel,
    demand: &NonlinearDemandSpec,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut shocks = Vec::with_capacity(panel.len());
    let mut mr = Vec::with_capacity(panel.len());
    for (row, &p) in panel.q.iter().zip(&panel.p) {
        let total: f64 = row.iter().sum();
        let u = demand.invert_u(total, p)?;
        shocks.push(u);
        mr.push(
            row.iter()
                .map(|&qi| qi * demand.d_price(total, u) + p)
                .collect(),
        );
    }
    Ok((mr, shocks))
}

/// Differences expected marginal revenue against expected output across two
/// demand levels: with `E[W | U] = 0`,
/// `E[MR_i | U = u] = μ_{V_i} + λ E[Q_i | U = u]`, so
/// `λ = [MR_i(u′) - MR_i(u)] / [μ_{Q_i|U}(u′) - μ_{Q_i|U}(u)]`, averaged over
/// firms. Mean costs then follow from the unconditional version.
pub fn identify_lambda_nonlinear(
    source: &NlSource,
    demand: &NonlinearDemandSpec,
    cfg: &LambdaConfig,
) -> Result<NonlinearLambda> {
    let n = source.n_firms();
    let (u, up, at_u, at_up, uncond) = match *source {
        NlSource::Population(pop) => {
            let (lo, hi) = pop.model.u_law.support();
            let (u, up) = cfg
                .u_pair
                .unwrap_or((lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)));
            let at_u = population_revenue(pop, u, cfg.w_nodes)?;
            let at_up = population_revenue(pop, up, cfg.w_nodes)?;
            let gu = GaussLegendre::new(cfg.u_nodes.max(1));
            let mut mr = vec![0.0; n];
            let mut q = vec![0.0; n];
            for (a, wa) in gu.mapped(0.0, 1.0) {
                let (r, x) = population_revenue(pop, pop.model.u_law.quantile(a)?, cfg.w_nodes)?;
                for i in 0..n {
                    mr[i] += wa * r[i];
                    q[i] += wa * x[i];
                }
            }
            (u, up, at_u, at_up, (mr, q))
        }
        NlSource::Sample { panel, band } => {
            let (mr, shocks) = sample_revenue(panel, demand)?;
            let (u, up) = match cfg.u_pair {
                Some(pair) => pair,
                None => {
                    let s = sorted(&shocks);
                    (quantile_type7(&s, 0.25), quantile_type7(&s, 0.75))
                }
            };
            let at = |c: f64| -> Result<(Vec<f64>, Vec<f64>)> {
                let (rows, _) = band.centred_band(&shocks, c)?;
                let k = rows.len() as f64;
                Ok((
                    (0..n)
                        .map(|i| rows.iter().map(|&r| mr[r][i]).sum::<f64>() / k)
                        .collect(),
                    (0..n)
                        .map(|i| rows.iter().map(|&r| panel.q[r][i]).sum::<f64>() / k)
                        .collect(),
                ))
            };
            let t = panel.len() as f64;
            let uncond = (
                (0..n)
                    .map(|i| mr.iter().map(|r| r[i]).sum::<f64>() / t)
                    .collect(),
                (0..n)
                    .map(|i| panel.column(i).iter().sum::<f64>() / t)
                    .collect(),
            );
            (u, up, at(u)?, at(up)?, uncond)
        }
    };
    if u == up {
        return Err(invalid("the two demand levels must differ"));
    }
    let by_firm = (0..n)
        .map(|i| {
            let den = at_up.1[i] - at_u.1[i];
            if den.abs() < 1e-14 {
                return Err(Error::Singular(format!(
                    "firm {i}: expected output does not move with demand"
                )));
            }
            Ok((at_up.0[i] - at_u.0[i]) / den)
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda = mean(&by_firm);
    let mu_v = (0..n).map(|i| uncond.0[i] - lambda * uncond.1[i]).collect();
    Ok(NonlinearLambda {
        lambda,
        by_firm,
        mu_v,
        u,
        u_prime: up,
    })
}

/// Identified objects the quantile recovery needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearIdentified {
    pub demand: NonlinearDemandSpec,
    pub lambda: f64,
    pub u_lower: f64,
    pub u_upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonlinearFv {
    pub table: QuantileTable,
    pub w_lower: f64,
    pub w_upper: f64,
    /// Largest deviation of a single level's `w̄` from the reported one.
    pub w_spread: f64,
}

/// Quantiles of `Q_i` given that firm `j` sits at an edge.
fn conditional_output_quantiles(
    source: &NlSource,
    i: usize,
    j: usize,
    edge: Edge,
    levels: &[f64],
) -> Result<Vec<f64>> {
    match *source {
        NlSource::Population(pop) => {
            // Firm j at an edge pins (W, U), leaving Q_i a decreasing map of V_i.
            let eq = if edge == Edge::Lower {
                &pop.lower
            } else {
                &pop.upper
            };
            levels
                .iter()
                .map(|&a| Ok(eq.quantity(i, pop.model.v_laws[i].quantile(1.0 - a)?)))
                .collect()
        }
        NlSource::Sample { panel, band } => {
            let x: Vec<f64> = match edge {
                Edge::Lower => panel.column(j),
                Edge::Upper => panel.column(j).iter().map(|q| -q).collect(),
            };
            let (rows, _, _) = band.lower_band(&x)?;
            let qi = sorted(&rows.iter().map(|&r| panel.q[r][i]).collect::<Vec<_>>());
            Ok(levels.iter().map(|&a| quantile_type7(&qi, a)).collect())
        }
    }
}

/// At each level `α`, the first-order condition at the lower corner gives
/// `F⁻¹_{V_i}(α) + w̄ = R_lo(α)` and at the upper corner
/// `F⁻¹_{V_i}(α) + w̲ = R_hi(α)`, where
/// `R(α) = x E[∂p(x + Q⁺₋ᵢ, u)] + E[p(x + Q⁺₋ᵢ, u)] - λx`, `x` is the
/// `(1-α)` quantile of `Q_i` given that a rival sits at the same corner and
/// the expectations run over rival output given that firm `i` does. With
/// `w̄ = -w̲` the three equations pin down the quantile and both bounds.
/// Each rival `j` gives a version of `x`; their results are averaged.
pub fn identify_fv_nonlinear(
    source: &NlSource,
    i: usize,
    alpha: &[f64],
    id: &NonlinearIdentified,
) -> Result<NonlinearFv> {
    let n = source.n_firms();
    if alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(invalid("quantile levels must lie in [0, 1]"));
    }
    let lo_law = EdgeLaw::new(source, i, Edge::Lower)?;
    let hi_law = EdgeLaw::new(source, i, Edge::Upper)?;
    let d = &id.demand;
    let rhs = |law: &EdgeLaw, x: f64, u: f64| -> f64 {
        x * law.expect(|s| d.d_price(x + s, u)) + law.expect(|s| d.price(x + s, u)) - id.lambda * x
    };
    let levels: Vec<f64> = alpha.iter().map(|a| 1.0 - a).collect();
    let mut r_lo = vec![0.0; alpha.len()];
    let mut r_hi = vec![0.0; alpha.len()];
    let rivals: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    for &j in &rivals {
        let x_lo = conditional_output_quantiles(source, i, j, Edge::Lower, &levels)?;
        let x_hi = conditional_output_quantiles(source, i, j, Edge::Upper, &levels)?;
        for k in 0..alpha.len() {
            r_lo[k] += rhs(&lo_law, x_lo[k], id.u_lower) / rivals.len() as f64;
            r_hi[k] += rhs(&hi_law, x_hi[k], id.u_upper) / rivals.len() as f64;
        }
    }
    // Unknowns (F⁻¹_{V_i}(α), w̄, w̲).
    let a = Matrix3::new(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0);
    let lu = a.lu();
    let mut values = Vec::with_capacity(alpha.len());
    let mut w_hi = Vec::with_capacity(alpha.len());
    for k in 0..alpha.len() {
        let x = lu
            .solve(&Vector3::new(r_lo[k], r_hi[k], 0.0))
            .ok_or_else(|| Error::Singular("corner first-order conditions".into()))?;
        values.push(x[0]);
        w_hi.push(x[1]);
    }
    let w_upper = mean(&w_hi);
    let w_spread = w_hi.iter().map(|w| (w - w_upper).abs()).fold(0.0, f64::max);
    Ok(NonlinearFv {
        table: QuantileTable {
            firm: i,
            alpha: alpha.to_vec(),
            values,
        },
        w_lower: -w_upper,
        w_upper,
        w_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_system_is_regular() {
        let a: Matrix3<f64> = Matrix3::new(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0);
        assert!((a.determinant() + 2.0).abs() < 1e-15);
    }

    #[test]
    fn slope_from_constructed_quantiles() {
        // Log-price gap 0.5 over a rival-output gap 1.
        let (pa, pap) = (1.0f64.exp(), 1.5f64.exp());
        let (ra, rap) = (3.0, 2.0);
        assert!(((pap.ln() - pa.ln()) / (ra - rap) - 0.5).abs() < 1e-15);
    }
}
