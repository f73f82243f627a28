//! Removal of the common exponential trend from firm outputs.
//!
//! Outputs follow `Q_it = c2_i - c1_i e^{-τt} + stationary part`. For a given
//! `τ` the coefficients are per-firm least squares, so the fit reduces to a
//! one-dimensional search over `τ`. Firm outputs share the demand and common
//! cost shocks, so the search and the test use the Gaussian likelihood with
//! an unrestricted cross-firm covariance rather than the pooled residual sum
//! of squares, which would treat strongly correlated firms as independent.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::panel::Panel;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetrendConfig {
    /// Size of the likelihood-ratio test of "no trend".
    pub test_level: f64,
    pub grid_points: usize,
}

impl Default for DetrendConfig {
    fn default() -> Self {
        Self {
            test_level: 0.01,
            grid_points: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetrendResult {
    pub tau: f64,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub trend_detected: bool,
    /// `T ln(det Σ̂₀ / det Σ̂₁)`, compared with a χ² on `I + 1` degrees of
    /// freedom.
    pub lr_statistic: f64,
    pub critical_value: f64,
    pub warnings: Vec<String>,
}

/// Centred outputs, their cross-product matrix and its Cholesky factor;
/// shared by every trial `τ`.
struct Centred {
    y: DMatrix<f64>,
    mean: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Centred {
    fn new(panel: &Panel) -> Result<Self> {
        let (t, n) = (panel.len(), panel.n_firms());
        let mut y = DMatrix::from_fn(t, n, |r, i| panel.q[r][i]);
        let mean = DVector::from_fn(n, |i, _| y.column(i).mean());
        for i in 0..n {
            y.column_mut(i).add_scalar_mut(-mean[i]);
        }
        let s0 = y.transpose() * &y;
        let chol = s0.cholesky().ok_or_else(|| {
            Error::Singular("output cross-product matrix is not positive definite".into())
        })?;
        Ok(Self { y, mean, chol })
    }
}

struct Fit {
    /// Share of generalized variance explained, `s'S₀⁻¹s / sxx`; the log
    /// determinant ratio is `-ln(1 - r2)`.
    r2: f64,
    c1: Vec<f64>,
    c2: Vec<f64>,
}

fn fit_at(panel: &Panel, c: &Centred, tau: f64) -> Fit {
    let x: Vec<f64> = panel.t.iter().map(|&t| (-tau * t as f64).exp()).collect();
    let xm = x.iter().sum::<f64>() / x.len() as f64;
    let xc = DVector::from_iterator(x.len(), x.iter().map(|v| v - xm));
    let sxx = xc.norm_squared();
    if sxx <= 0.0 {
        return Fit {
            r2: 0.0,
            c1: vec![0.0; c.mean.len()],
            c2: c.mean.iter().copied().collect(),
        };
    }
    let s = c.y.transpose() * &xc;
    let r2 = (s.dot(&c.chol.solve(&s)) / sxx).clamp(0.0, 1.0 - 1e-15);
    let c1: Vec<f64> = s.iter().map(|v| -v / sxx).collect();
    let c2 = c1.iter().zip(c.mean.iter()).map(|(c1, m)| m + c1 * xm).collect();
    Fit { r2, c1, c2 }
}

pub fn detrend_fit(panel: &Panel, cfg: &DetrendConfig) -> Result<DetrendResult> {
    let n = panel.n_firms();
    let t_len = panel.len();
    if t_len < n + 5 {
        return Err(Error::InsufficientData(
            "detrending needs more markets than firms plus five".into(),
        ));
    }
    let centred = Centred::new(panel)?;
    // The trend must at least halve within the sample; slower decay is
    // indistinguishable from a linear drift and pins the asymptote nowhere.
    let tau_lo = (std::f64::consts::LN_2 / t_len as f64).ln();
    let tau_hi = 0.5f64.ln();
    let g = cfg.grid_points.max(10);
    let grid: Vec<f64> = (0..g)
        .map(|k| (tau_lo + (tau_hi - tau_lo) * k as f64 / (g - 1) as f64).exp())
        .collect();
    let obj = |lt: f64| -fit_at(panel, &centred, lt.exp()).r2;
    let vals: Vec<f64> = grid.iter().map(|&tau| obj(tau.ln())).collect();
    let k = (0..g).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    // Golden-section refinement in log τ between the neighbouring grid points.
    let (mut a, mut b) = (
        grid[k.saturating_sub(1)].ln(),
        grid[(k + 1).min(g - 1)].ln(),
    );
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (obj(c), obj(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = obj(d);
        }
    }
    let tau = (0.5 * (a + b)).exp();
    let fit = fit_at(panel, &centred, tau);
    // Bartlett-style small-sample factor for a multivariate regression.
    let scale = t_len as f64 - 2.0 - 0.5 * (n as f64 + 1.0);
    let lr = -scale * (1.0 - fit.r2).ln();
    let crit = ChiSquared::new((n + 1) as f64)
        .map_err(|e| Error::Numerical(format!("chi-squared distribution: {e}")))?
        .inverse_cdf(1.0 - cfg.test_level);
    let mut warnings = Vec::new();
    let at_edge = k == 0 && tau < grid[1];
    let detected = lr > crit && !at_edge;
    if lr > crit && at_edge {
        warnings.push(format!(
            "apparent trend decays too slowly to separate from the level (tau at lower bound {:.2e}); not detrending",
            grid[0]
        ));
    } else if !detected {
        warnings.push(format!(
            "no significant trend (LR = {lr:.3} <= {crit:.3}); tau is not identified, returning tau = 0"
        ));
    }
    if detected {
        Ok(DetrendResult {
            tau,
            c1: fit.c1,
            c2: fit.c2,
            trend_detected: true,
            lr_statistic: lr,
            critical_value: crit,
            warnings,
        })
    } else {
        Ok(DetrendResult {
            tau: 0.0,
            c1: vec![0.0; n],
            c2: centred.mean.iter().copied().collect(),
            trend_detected: false,
            lr_statistic: lr,
            critical_value: crit,
            warnings,
        })
    }
}

/// Adds back `ĉ1 e^{-τ̂t}` so outputs become stationary.
pub fn apply_detrend(panel: &Panel, fit: &DetrendResult) -> Panel {
    let q = panel
        .q
        .iter()
        .zip(&panel.t)
        .map(|(r, &t)| {
            let e = (-fit.tau * t as f64).exp();
            r.iter().zip(&fit.c1).map(|(q, c)| q + c * e).collect()
        })
        .collect();
    Panel {
        t: panel.t.clone(),
        p: panel.p.clone(),
        q,
    }
}

pub fn detrend(panel: &Panel, cfg: &DetrendConfig) -> Result<(Panel, DetrendResult)> {
    let fit = detrend_fit(panel, cfg)?;
    Ok((apply_detrend(panel, &fit), fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{simulate_panel, TrendSpec};
    use crate::theta::ThetaParam;

    #[test]
    fn recovers_trend_rate_and_removes_it() {
        let theta = ThetaParam::mc_design();
        let m = theta.model().unwrap();
        let tr = TrendSpec {
            tau: 0.01,
            tau_s: vec![2.0; 20],
        };
        let sim = simulate_panel(&m, &tr, 700, 3).unwrap();
        let (dt, fit) = detrend(&sim.panel, &DetrendConfig::default()).unwrap();
        assert!(fit.trend_detected);
        assert!((fit.tau - 0.01).abs() < 0.001, "tau = {}", fit.tau);
        let c1 = 2.0 / (theta.lambda + theta.beta);
        assert!(fit.c1.iter().all(|c| (c - c1).abs() < 0.25 * c1));
        // Detrended outputs match the trend-free simulation up to estimation error.
        let flat = simulate_panel(&m, &TrendSpec::none(20), 700, 3).unwrap();
        let err: f64 =
            dt.q.iter()
                .zip(&flat.panel.q)
                .map(|(a, b)| (a[0] - b[0]).abs())
                .sum::<f64>()
                / 700.0;
        assert!(err < 0.2, "mean abs error {err}");
    }

    #[test]
    fn flat_panel_returns_zero_rate() {
        let m = ThetaParam::mc_design().model().unwrap();
        let sim = simulate_panel(&m, &TrendSpec::none(20), 336, 8).unwrap();
        let (dt, fit) = detrend(&sim.panel, &DetrendConfig::default()).unwrap();
        assert!(!fit.trend_detected);
        assert_eq!(fit.tau, 0.0);
        assert_eq!(dt, sim.panel);
        assert_eq!(fit.warnings.len(), 1);
    }
}
