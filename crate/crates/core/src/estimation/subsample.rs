//! Subsampling confidence intervals from contiguous blocks.

use serde::{Deserialize, Serialize};

use super::mle::{estimate, Estimate, EstimationConfig};
use crate::error::{invalid, Error, Result};
use crate::panel::Panel;
use crate::stats::quantile_type7;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsampleConfig {
    /// Block length is `floor(T^exponent)`.
    pub exponent: f64,
    /// Cap on the number of blocks re-estimated; evenly spaced blocks are
    /// kept when there are more.
    pub max_blocks: usize,
    pub level: f64,
    /// The estimator is assumed to converge at rate `T^rate_exponent`.
    pub rate_exponent: f64,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        Self {
            exponent: 0.9,
            max_blocks: 150,
            level: 0.95,
            rate_exponent: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsampleCi {
    pub names: Vec<String>,
    pub estimate: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub block_length: usize,
    pub blocks_available: usize,
    pub blocks_used: usize,
    pub blocks_failed: usize,
}

/// Block length and the start index of each block that will be used.
pub fn block_plan(t_len: usize, cfg: &SubsampleConfig) -> Result<(usize, usize, Vec<usize>)> {
    if !(cfg.exponent > 0.0 && cfg.exponent < 1.0) {
        return Err(invalid("block exponent must lie in (0, 1)"));
    }
    let b = (t_len as f64).powf(cfg.exponent).floor() as usize;
    if b < 2 || b >= t_len {
        return Err(Error::InsufficientData(format!(
            "block length {b} unusable for T = {t_len}"
        )));
    }
    let available = t_len - b + 1;
    let used = available.min(cfg.max_blocks.max(1));
    let starts = if used == available {
        (0..available).collect()
    } else {
        (0..used)
            .map(|k| k * (available - 1) / (used - 1).max(1))
            .collect()
    };
    Ok((b, available, starts))
}

/// Symmetric interval `θ̂ ± c/T^r`, where `c` is the `level` quantile of
/// `b^r |θ̂_b - θ̂|` over blocks. `estimator` maps a block to a parameter
/// vector of the same length as `theta_hat`.
pub fn subsample_ci<F>(
    panel: &Panel,
    names: &[String],
    theta_hat: &[f64],
    cfg: &SubsampleConfig,
    mut estimator: F,
) -> Result<SubsampleCi>
where
    F: FnMut(&Panel) -> Result<Vec<f64>>,
{
    let t_len = panel.len();
    let (b, available, starts) = block_plan(t_len, cfg)?;
    let k = theta_hat.len();
    let mut dev: Vec<Vec<f64>> = vec![Vec::with_capacity(starts.len()); k];
    let mut failed = 0;
    let scale = (b as f64).powf(cfg.rate_exponent);
    for &s in &starts {
        match estimator(&panel.slice(s, b)) {
            Ok(est) if est.len() == k => {
                for j in 0..k {
                    dev[j].push(scale * (est[j] - theta_hat[j]).abs());
                }
            }
            _ => failed += 1,
        }
    }
    if failed == starts.len() {
        return Err(Error::Numerical("every block re-estimation failed".into()));
    }
    let norm = (t_len as f64).powf(cfg.rate_exponent);
    let mut lower = Vec::with_capacity(k);
    let mut upper = Vec::with_capacity(k);
    for j in 0..k {
        dev[j].sort_by(f64::total_cmp);
        let c = quantile_type7(&dev[j], cfg.level);
        lower.push(theta_hat[j] - c / norm);
        upper.push(theta_hat[j] + c / norm);
    }
    Ok(SubsampleCi {
        names: names.to_vec(),
        estimate: theta_hat.to_vec(),
        lower,
        upper,
        block_length: b,
        blocks_available: available,
        blocks_used: starts.len() - failed,
        blocks_failed: failed,
    })
}

/// Re-estimates the likelihood on each block, starting from the full-sample
/// estimate with a single start.
pub fn subsample_ci_mle(
    panel: &Panel,
    full: &Estimate,
    est_cfg: &EstimationConfig,
    cfg: &SubsampleConfig,
) -> Result<SubsampleCi> {
    let block_cfg = EstimationConfig {
        n_starts: 1,
        bounds: Some(full.bounds.clone()),
        ..est_cfg.clone()
    };
    let theta_hat = full.theta.to_vec();
    subsample_ci(panel, &full.names, &theta_hat, cfg, |block| {
        Ok(estimate(block, &full.theta, &block_cfg)?.theta.to_vec())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_counts_for_monthly_sample() {
        let (b, available, starts) = block_plan(336, &SubsampleConfig::default()).unwrap();
        assert_eq!(b, 187);
        assert_eq!(available, 150);
        assert_eq!(starts, (0..150).collect::<Vec<_>>());
        let (_, available, starts) = block_plan(700, &SubsampleConfig::default()).unwrap();
        assert!(available > 150);
        assert_eq!(starts.len(), 150);
        assert_eq!(*starts.last().unwrap(), available - 1);
    }

    #[test]
    fn constant_data_gives_zero_width() {
        let panel = Panel::new(vec![3.0; 336], vec![vec![1.0, 2.0]; 336]).unwrap();
        let mean = |p: &Panel| Ok(vec![p.p.iter().sum::<f64>() / p.len() as f64]);
        let ci = subsample_ci(
            &panel,
            &["p".into()],
            &[3.0],
            &SubsampleConfig::default(),
            mean,
        )
        .unwrap();
        assert_eq!(ci.lower[0], 3.0);
        assert_eq!(ci.upper[0], 3.0);
    }
}
