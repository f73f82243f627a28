//! Repeated simulate → detrend → estimate cycles and their summary table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::distributions::derive_seed;
use crate::error::{Error, Result};
use crate::estimation::detrend::{detrend, DetrendConfig};
use crate::estimation::mle::{estimate, EstimationConfig};
use crate::simulator::{simulate_panel, TrendSpec};
use crate::theta::ThetaParam;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub t_len: usize,
    pub reps: usize,
    pub seed: u64,
    pub estimation: EstimationConfig,
    pub detrend: DetrendConfig,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            t_len: 350,
            reps: 50,
            seed: 20_240_101,
            estimation: EstimationConfig {
                n_starts: 1,
                ..Default::default()
            },
            detrend: DetrendConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McRow {
    pub parameter: String,
    pub truth: f64,
    /// Mean of `(θ̂ - θ) / θ`.
    pub bias: f64,
    /// Standard deviation of `θ̂ / θ` (divisor n).
    pub sd: f64,
    /// `sqrt(mean(((θ̂ - θ) / θ)²))`.
    pub rmse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McResult {
    pub t_len: usize,
    pub reps_requested: usize,
    pub failures: Vec<(usize, String)>,
    pub estimates: Vec<Vec<f64>>,
    pub table: Vec<McRow>,
}

impl McResult {
    pub fn row(&self, name: &str) -> Option<&McRow> {
        self.table.iter().find(|r| r.parameter == name)
    }

    pub fn write_table_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["parameter", "truth", "bias", "sd", "rmse"])?;
        for r in &self.table {
            w.write_record([
                r.parameter.clone(),
                r.truth.to_string(),
                r.bias.to_string(),
                r.sd.to_string(),
                r.rmse.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Relative bias, standard deviation and RMSE of estimates against `truth`.
pub fn summarize(names: &[String], truth: &[f64], estimates: &[Vec<f64>]) -> Vec<McRow> {
    let n = estimates.len() as f64;
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let rel: Vec<f64> = estimates
                .iter()
                .map(|e| (e[k] - truth[k]) / truth[k])
                .collect();
            let bias = rel.iter().sum::<f64>() / n;
            let sd = (rel.iter().map(|r| (r - bias).powi(2)).sum::<f64>() / n).sqrt();
            let rmse = (rel.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
            McRow {
                parameter: name.clone(),
                truth: truth[k],
                bias,
                sd,
                rmse,
            }
        })
        .collect()
}

/// Runs `cfg.reps` replications; replication `r` simulates with seed
/// `derive_seed(cfg.seed, r)` and starts the search at the true parameters.
/// Failed replications are listed and left out of the table.
pub fn run_monte_carlo(
    theta: &ThetaParam,
    trend: &TrendSpec,
    cfg: &MonteCarloConfig,
) -> Result<McResult> {
    let model = theta.model()?;
    let outcomes: Vec<(usize, Result<Vec<f64>>)> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<Vec<f64>> {
                let sim =
                    simulate_panel(&model, trend, cfg.t_len, derive_seed(cfg.seed, r as u64))?;
                let (panel, _) = detrend(&sim.panel, &cfg.detrend)?;
                let est_cfg = EstimationConfig {
                    seed: derive_seed(cfg.estimation.seed, r as u64),
                    ..cfg.estimation.clone()
                };
                Ok(estimate(&panel, theta, &est_cfg)?.theta.to_vec())
            };
            (r, run())
        })
        .collect();
    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    for (r, o) in outcomes {
        match o {
            Ok(e) => estimates.push(e),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if estimates.is_empty() {
        return Err(Error::Numerical("every replication failed".into()));
    }
    let table = summarize(&theta.names(), &theta.to_vec(), &estimates);
    Ok(McResult {
        t_len: cfg.t_len,
        reps_requested: cfg.reps,
        failures,
        estimates,
        table,
    })
}
