//! Constructive nonparametric identification of the model primitives from
//! the joint law of price and outputs.
//!
//! Every step runs in one of two modes. In population mode the conditional
//! laws are derived exactly from a [`StructuralModel`], so the pipeline must
//! return the model's own primitives. In sample mode probability-zero
//! conditioning events are replaced by bands holding the observations
//! closest to the event (see [`BandRule`]).

mod boundary;
mod deconvolution;
mod diagnostics;
mod moments;
mod sum_law;

pub use boundary::{identify_beta, identify_fv, BandRule, BetaEstimate, BoundaryEvent};
pub use deconvolution::{
    fw_given_u, identify_phi_w, joint_cdf_wu, ConditionalCdf, PhiConfig, PhiSummary, PhiW,
    PwlCharFn,
};
pub use diagnostics::{
    test_private_information, DiagnosticConfig, FirmDiagnostic, PrivateInfoDiagnostics,
};
pub use moments::{identify_lambda, identify_mu_v, LambdaEstimate, ObservableMoments};
pub use sum_law::SumLaw;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::Univariate;
use crate::error::{invalid, Result};
use crate::panel::Panel;
use crate::stats::{quantile_type7, sorted};
use crate::theta::StructuralModel;

/// Where the joint law of `(P, Q)` comes from.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Population(&'a StructuralModel),
    Sample { panel: &'a Panel, band: BandRule },
}

impl Source<'_> {
    pub fn n_firms(&self) -> usize {
        match self {
            Source::Population(m) => m.n_firms(),
            Source::Sample { panel, .. } => panel.n_firms(),
        }
    }

    pub fn moments(&self) -> Result<ObservableMoments> {
        match self {
            Source::Population(m) => ObservableMoments::population(m),
            Source::Sample { panel, .. } => ObservableMoments::from_panel(panel),
        }
    }
}

/// The scalar primitives recovered so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identified {
    pub beta: f64,
    pub lambda: f64,
    pub mu_v: Vec<f64>,
}

/// Quantile function of one firm's private cost at the listed levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub firm: usize,
    pub alpha: Vec<f64>,
    pub values: Vec<f64>,
}

impl QuantileTable {
    /// Rearranges the values into nondecreasing order, so the table is a
    /// valid quantile function.
    pub fn monotonize(&mut self) {
        self.values.sort_by(f64::total_cmp);
    }
}

/// Averages the recovered quantile functions over every conditioning firm
/// `j ≠ i`; also returns the largest deviation of a single `j` from the
/// average.
pub fn identify_fv_averaged(
    source: &Source,
    i: usize,
    alpha: &[f64],
    id: &Identified,
) -> Result<(QuantileTable, f64)> {
    let n = source.n_firms();
    let tables = (0..n)
        .filter(|&j| j != i)
        .map(|j| identify_fv(source, i, j, alpha, id))
        .collect::<Result<Vec<_>>>()?;
    if tables.is_empty() {
        return Err(invalid("need at least two firms"));
    }
    let k = tables.len() as f64;
    let values: Vec<f64> = (0..alpha.len())
        .map(|a| tables.iter().map(|t| t.values[a]).sum::<f64>() / k)
        .collect();
    let spread = tables
        .iter()
        .flat_map(|t| t.values.iter().zip(&values).map(|(x, m)| (x - m).abs()))
        .fold(0.0, f64::max);
    let mut table = QuantileTable {
        firm: i,
        alpha: alpha.to_vec(),
        values,
    };
    table.monotonize();
    Ok((table, spread))
}

/// Demand shocks `u_t = p_t + β Σ_i q_it` and their empirical CDF.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemandShock {
    pub u: Vec<f64>,
    /// Sorted shocks and the empirical CDF at each.
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl DemandShock {
    /// Kolmogorov–Smirnov distance to a reference law.
    pub fn ks_distance<D: Univariate + ?Sized>(&self, law: &D) -> f64 {
        let n = self.grid.len() as f64;
        self.grid
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let f = law.cdf(x);
                (f - k as f64 / n).abs().max((self.cdf[k] - f).abs())
            })
            .fold(0.0, f64::max)
    }
}

pub fn recover_demand_shock(panel: &Panel, beta: f64) -> DemandShock {
    let u = panel.demand_shocks(beta);
    let grid = sorted(&u);
    let n = grid.len() as f64;
    let cdf = (1..=grid.len()).map(|k| k as f64 / n).collect();
    DemandShock { u, grid, cdf }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifyConfig {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub band: BandRule,
    /// Levels at which the private-cost quantile tables are reported.
    pub report_alpha: Vec<f64>,
    /// Demand levels at which `F_{W|U}` is recovered; empty means the median
    /// recovered demand shock.
    pub conditioning_u: Vec<f64>,
    /// Firms whose outputs are deconvolved.
    pub phi_firms: Vec<usize>,
    pub w_points: usize,
    pub phi: PhiConfig,
    pub diagnostics: DiagnosticConfig,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            alpha_prime: 0.75,
            band: BandRule::default(),
            report_alpha: (1..100).map(|k| k as f64 / 100.0).collect(),
            conditioning_u: Vec::new(),
            phi_firms: vec![0],
            w_points: 101,
            phi: PhiConfig::default(),
            diagnostics: DiagnosticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub beta_hat: f64,
    pub beta_by_firm: Vec<f64>,
    pub lambda_hat: f64,
    pub lambda_by_firm: Vec<f64>,
    pub mu_v_hat: Vec<f64>,
    /// Sample mode only.
    pub u_cdf: Option<DemandShockGrid>,
    pub fv_tables: Vec<QuantileTable>,
    /// Largest deviation of a single conditioning firm from the averaged table.
    pub fv_spread: Vec<f64>,
    pub phi_w: Vec<PhiSummary>,
    pub fw_given_u: Vec<ConditionalCdf>,
    /// Sample mode only.
    pub diagnostics: Option<PrivateInfoDiagnostics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemandShockGrid {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
}

/// Runs the full sequence: `β`, `F_U`, `λ`, `μ_V`, the `F_{V_i}` and
/// `F_{W|U}`.
pub fn identify(source: &Source, cfg: &IdentifyConfig) -> Result<IdentificationReport> {
    let n = source.n_firms();
    let beta_by_firm = (0..n)
        .map(|i| identify_beta(source, i, cfg.alpha, cfg.alpha_prime).map(|b| b.beta))
        .collect::<Result<Vec<_>>>()?;
    let beta = beta_by_firm.iter().sum::<f64>() / n as f64;
    let moments = source.moments()?;
    let lam = identify_lambda(&moments, beta)?;
    let mu_v = identify_mu_v(&moments, beta, lam.lambda);
    let id = Identified {
        beta,
        lambda: lam.lambda,
        mu_v: mu_v.clone(),
    };

    let mut fv_tables = Vec::with_capacity(n);
    let mut fv_spread = Vec::with_capacity(n);
    for i in 0..n {
        let (t, s) = identify_fv_averaged(source, i, &cfg.report_alpha, &id)?;
        fv_tables.push(t);
        fv_spread.push(s);
    }

    let (u_cdf, diagnostics, median_u) = match source {
        Source::Sample { panel, .. } => {
            let d = recover_demand_shock(panel, beta);
            let med = quantile_type7(&d.grid, 0.5);
            let diag = test_private_information(panel, &cfg.diagnostics)?;
            (
                Some(DemandShockGrid {
                    grid: d.grid,
                    cdf: d.cdf,
                }),
                Some(diag),
                med,
            )
        }
        Source::Population(m) => (None, None, m.u_law.quantile(0.5)?),
    };
    let us = if cfg.conditioning_u.is_empty() {
        vec![median_u]
    } else {
        cfg.conditioning_u.clone()
    };

    let mut phi_w = Vec::new();
    let mut fw = Vec::new();
    let den_alpha = cfg.phi.alpha_grid();
    for &i in &cfg.phi_firms {
        if i >= n {
            return Err(invalid(format!("phi firm {i} out of range")));
        }
        let (table, _) = identify_fv_averaged(source, i, &den_alpha, &id)?;
        let (lo, hi) = w_range(&table, source);
        let points: Vec<f64> = (0..cfg.w_points.max(2))
            .map(|k| lo + (hi - lo) * k as f64 / (cfg.w_points.max(2) - 1) as f64)
            .collect();
        for &u in &us {
            let phi = identify_phi_w(source, i, u, &table, &id, &cfg.phi)?;
            fw.push(fw_given_u(&phi, &points, &cfg.phi));
            phi_w.push(phi.summary());
        }
    }

    Ok(IdentificationReport {
        beta_hat: beta,
        beta_by_firm,
        lambda_hat: lam.lambda,
        lambda_by_firm: lam.by_firm,
        mu_v_hat: mu_v,
        u_cdf,
        fv_tables,
        fv_spread,
        phi_w,
        fw_given_u: fw,
        diagnostics,
    })
}

// Evaluation range for F_{W|U}: the model's support in population mode, a
// symmetric range scaled by the private-cost spread in a sample or when the
// model's common shock is degenerate.
fn w_range(table: &QuantileTable, source: &Source) -> (f64, f64) {
    let spread = || {
        let s = table.values.last().copied().unwrap_or(1.0) - table.values.first().copied().unwrap_or(0.0);
        s.max(1e-3)
    };
    match source {
        Source::Population(m) => {
            let (lo, hi) = m.w_shock.bounds();
            if hi > lo {
                let pad = 0.1 * (hi - lo);
                (lo - pad, hi + pad)
            } else {
                let r = spread();
                (lo - r, lo + r)
            }
        }
        Source::Sample { .. } => {
            let r = spread();
            (-r, r)
        }
    }
}

impl IdentificationReport {
    /// Writes `identification_report.json` plus CSV grids (`fv_quantiles.csv`,
    /// `fw_given_u.csv` and, in sample mode, `u_cdf.csv`).
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let f = std::fs::File::create(dir.join("identification_report.json"))?;
        serde_json::to_writer_pretty(f, self)?;

        let mut w = csv::Writer::from_path(dir.join("fv_quantiles.csv"))?;
        w.write_record(["firm", "alpha", "quantile"])?;
        for t in &self.fv_tables {
            for (a, v) in t.alpha.iter().zip(&t.values) {
                w.write_record([t.firm.to_string(), a.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("fw_given_u.csv"))?;
        w.write_record(["firm", "u", "w", "cdf"])?;
        for c in &self.fw_given_u {
            for (x, f) in c.points.iter().zip(&c.cdf) {
                w.write_record([
                    c.firm.to_string(),
                    c.u.to_string(),
                    x.to_string(),
                    f.to_string(),
                ])?;
            }
        }
        w.flush()?;

        if let Some(g) = &self.u_cdf {
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("u_cdf.csv"))?);
            writeln!(f, "u,cdf")?;
            for (u, c) in g.grid.iter().zip(&g.cdf) {
                writeln!(f, "{u},{c}")?;
            }
        }
        Ok(())
    }
}
