//! Bounded, multi-start maximum likelihood.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::likelihood::{log_likelihood_prepared, Prepared, INFEASIBLE_BASE, INFEASIBLE_SLOPE};
use super::nelder_mead::{minimize, NelderMeadConfig};
use crate::distributions::stream_rng;
use crate::error::{invalid, Error, Result};
use crate::panel::Panel;
use crate::quadrature::GaussLegendre;
use crate::theta::ThetaParam;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    pub gl_nodes: usize,
    /// Number of starting points, the supplied one included.
    pub n_starts: usize,
    /// Half-width of uniform jitter applied to extra starts, in the
    /// unconstrained coordinates.
    pub start_jitter: f64,
    /// Relative half-width of the default parameter box around the start.
    pub box_halfwidth: f64,
    /// Explicit box; overrides `box_halfwidth` when present.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub tol_f: f64,
    pub tol_x: f64,
    pub max_evals: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            gl_nodes: 64,
            n_starts: 5,
            start_jitter: 0.5,
            box_halfwidth: 0.5,
            bounds: None,
            tol_f: 1e-8,
            tol_x: 1e-6,
            max_evals: 20_000,
            restarts: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartDiagnostics {
    pub start: Vec<f64>,
    pub estimate: Vec<f64>,
    pub loglik: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Estimate {
    pub names: Vec<String>,
    pub theta: ThetaParam,
    /// Log-likelihood at the estimate, penalties included.
    pub loglik: f64,
    /// Whether every market lies in the support implied by the estimate.
    pub feasible: bool,
    pub converged: bool,
    pub bounds: Vec<(f64, f64)>,
    pub starts: Vec<StartDiagnostics>,
}

/// `[θ₀(1-h), θ₀(1+h)]` for each parameter, with non-negativity enforced
/// where the parameter must be non-negative.
pub fn default_bounds(start: &ThetaParam, halfwidth: f64) -> Vec<(f64, f64)> {
    start
        .to_vec()
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let h = if x.abs() > 1e-12 {
                halfwidth * x.abs()
            } else {
                1.0
            };
            let (mut lo, hi) = (x - h, x + h);
            // λ and u̲ may not go negative; every other positive parameter
            // keeps its sign automatically when halfwidth < 1.
            if (k == 1 || k == 2) && lo < 0.0 {
                lo = 0.0;
            }
            (lo, hi)
        })
        .collect()
}

struct BoxMap {
    bounds: Vec<(f64, f64)>,
}

impl BoxMap {
    fn to_box(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.bounds)
            .map(|(&z, &(lo, hi))| lo + (hi - lo) / (1.0 + (-z).exp()))
            .collect()
    }

    fn from_box(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(&x, &(lo, hi))| {
                let s = ((x - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
                (s / (1.0 - s)).ln()
            })
            .collect()
    }
}

// Indices of the demand-shock parameters (u̲, μ_U, σ²_U) in the vector.
const DEMAND: [usize; 3] = [2, 3, 4];

/// Demand-shock part of the likelihood maximised over `(u̲, μ_U, σ²_U)` for
/// given shocks `u_t`. Only this part involves those three parameters, and
/// it rises with `u̲` up to `min_t u_t`, so `u̲` sits at that bound (or the
/// box edge) and `(μ_U, σ²_U)` solve a smooth two-dimensional problem.
fn profile_demand(u: &[f64], bounds: &[(f64, f64)]) -> std::result::Result<([f64; 3], f64), f64> {
    let (ul_lo, ul_hi) = bounds[DEMAND[0]];
    let u_min = u.iter().cloned().fold(f64::INFINITY, f64::min);
    if u_min < ul_lo {
        return Err(u.iter().map(|&x| (ul_lo - x).max(0.0)).sum::<f64>());
    }
    let u_lower = u_min.min(ul_hi);
    let t = u.len() as f64;
    let s1: f64 = u.iter().sum();
    let s2: f64 = u.iter().map(|x| x * x).sum();
    let sub = BoxMap {
        bounds: vec![bounds[DEMAND[1]], bounds[DEMAND[2]]],
    };
    let nll = |x: &[f64]| -> f64 {
        let (mu, var) = (x[0], x[1]);
        let sigma = var.sqrt();
        let za = (u_lower - mu) / sigma;
        let mass = 0.5 * statrs::function::erf::erfc(za / std::f64::consts::SQRT_2);
        let ss = s2 - 2.0 * mu * s1 + t * mu * mu;
        ss / (2.0 * var) + t * (sigma.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln() + mass.ln())
    };
    let cfg = NelderMeadConfig {
        tol_f: 1e-12,
        tol_x: 1e-10,
        max_evals: 5_000,
        initial_step: 0.5,
        restarts: 2,
    };
    let r = minimize(|z| nll(&sub.to_box(z)), &[0.0, 0.0], &cfg);
    let x = sub.to_box(&r.x);
    Ok(([u_lower, x[0], x[1]], -r.f))
}

/// Maximises the likelihood of `panel` (already detrended) over the box
/// around `start`. The demand-shock parameters are profiled out, and the
/// simplex search runs over the remaining ones.
pub fn estimate(panel: &Panel, start: &ThetaParam, cfg: &EstimationConfig) -> Result<Estimate> {
    start.validate()?;
    if panel.n_firms() != start.n_firms() {
        return Err(invalid(
            "panel and parameter template disagree on the number of firms",
        ));
    }
    if panel.len() < 2 {
        return Err(Error::InsufficientData("need at least two markets".into()));
    }
    let bounds = match &cfg.bounds {
        Some(b) if b.len() == start.n_params() => b.clone(),
        Some(_) => return Err(invalid("bounds length differs from number of parameters")),
        None => default_bounds(start, cfg.box_halfwidth),
    };
    if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(invalid("empty parameter box"));
    }
    let outer: Vec<usize> = (0..start.n_params())
        .filter(|k| !DEMAND.contains(k))
        .collect();
    let map = BoxMap {
        bounds: outer.iter().map(|&k| bounds[k]).collect(),
    };
    let gl = GaussLegendre::new(cfg.gl_nodes);
    let t_len = panel.len() as f64;
    let x_start = start.to_vec();
    let assemble = |y: &[f64], demand: [f64; 3]| -> Vec<f64> {
        let mut x = x_start.clone();
        for (&k, &v) in outer.iter().zip(y) {
            x[k] = v;
        }
        for (&k, v) in DEMAND.iter().zip(demand) {
            x[k] = v;
        }
        x
    };
    // Profiled log-likelihood and the full parameter vector attaining it.
    let profiled = |z: &[f64]| -> (f64, Vec<f64>) {
        let y = map.to_box(z);
        let beta = y[0];
        let u: Vec<f64> = panel.demand_shocks(beta);
        let (demand, ll_u) = match profile_demand(&u, &bounds) {
            Ok(v) => v,
            Err(viol) => {
                let x = assemble(&y, [bounds[2].0, x_start[3], x_start[4]]);
                return (INFEASIBLE_BASE * t_len - INFEASIBLE_SLOPE * viol, x);
            }
        };
        let x = assemble(&y, demand);
        let prep = match start.with_values(&x).and_then(|t| Prepared::new(&t)) {
            Ok(p) => p,
            Err(_) => return (f64::MIN / 4.0, x),
        };
        let mut vt = Vec::with_capacity(panel.n_firms());
        let mut ll = ll_u;
        for (ut, q) in u.iter().zip(&panel.q) {
            ll += match prep.cost_part(*ut, q, &gl, &mut vt) {
                Ok(l) => l,
                Err(viol) => INFEASIBLE_BASE - INFEASIBLE_SLOPE * viol,
            };
        }
        (ll, x)
    };
    let objective = |z: &[f64]| -profiled(z).0 / t_len;
    let nm = NelderMeadConfig {
        tol_f: cfg.tol_f,
        tol_x: cfg.tol_x,
        max_evals: cfg.max_evals,
        restarts: cfg.restarts,
        ..Default::default()
    };
    let z0 = map.from_box(&outer.iter().map(|&k| x_start[k]).collect::<Vec<_>>());
    let mut rng = stream_rng(cfg.seed, 0);
    let mut starts = Vec::new();
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for s in 0..cfg.n_starts.max(1) {
        let zs: Vec<f64> = if s == 0 {
            z0.clone()
        } else {
            z0.iter()
                .map(|z| z + rng.random_range(-cfg.start_jitter..=cfg.start_jitter))
                .collect()
        };
        let r = minimize(objective, &zs, &nm);
        let (_, x) = profiled(&r.x);
        starts.push(StartDiagnostics {
            start: profiled(&zs).1,
            estimate: x.clone(),
            loglik: -r.f * t_len,
            evals: r.evals,
            converged: r.converged,
        });
        if best.as_ref().is_none_or(|(f, _, _)| r.f < *f) {
            best = Some((r.f, x, r.converged));
        }
    }
    let (_, x, converged) = best.expect("at least one start");
    let theta = start.with_values(&x)?;
    let ll = log_likelihood_prepared(&Prepared::new(&theta)?, panel, &gl);
    Ok(Estimate {
        names: start.names(),
        theta,
        loglik: ll.value,
        feasible: ll.feasible(),
        converged,
        bounds,
        starts,
    })
}
