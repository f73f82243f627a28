//! Testable implications of private information: continuity of outputs and
//! non-degenerate rival output and price at a firm's lowest output.

use serde::{Deserialize, Serialize};

use super::boundary::{sample_band, BandRule};
use crate::error::Result;
use crate::panel::Panel;
use crate::stats::variance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticConfig {
    pub band: BandRule,
    /// Minimum ratio of in-band to unconditional variance for `Q⁺₋ᵢ` and `P`.
    pub density_floor: f64,
    /// Outputs at or below this count as zero.
    pub zero_tol: f64,
    /// Share of zero outputs that flags a mass point.
    pub mass_tol: f64,
}

impl Default for DiagnosticConfig {
    fn default() -> Self {
        Self {
            band: BandRule::default(),
            density_floor: 0.05,
            zero_tol: 1e-9,
            mass_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirmDiagnostic {
    pub firm: usize,
    pub q_floor: f64,
    pub epsilon: f64,
    pub n_band: usize,
    pub var_rivals_band: f64,
    pub var_price_band: f64,
    pub ratio_rivals: f64,
    pub ratio_price: f64,
    pub zero_share: f64,
    pub mass_point: bool,
    /// Rival output and price both keep a non-degenerate law in the band.
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrivateInfoDiagnostics {
    pub firms: Vec<FirmDiagnostic>,
    pub all_pass: bool,
    pub any_mass_point: bool,
}

/// For each firm, takes the band of its lowest outputs and compares the
/// variance of rival output and of price inside the band with their
/// unconditional variance. Under private information both stay bounded away
/// from zero as the band shrinks; under complete information the lowest
/// output pins every rival's cost and both collapse.
pub fn test_private_information(
    panel: &Panel,
    cfg: &DiagnosticConfig,
) -> Result<PrivateInfoDiagnostics> {
    let n = panel.n_firms();
    let t = panel.len();
    let var_p = variance(&panel.p);
    let mut firms = Vec::with_capacity(n);
    for i in 0..n {
        let (rows, event) = sample_band(panel, i, &cfg.band)?;
        let rivals = panel.rival_totals(i);
        let var_r = variance(&rivals);
        let in_r: Vec<f64> = rows.iter().map(|&r| rivals[r]).collect();
        let in_p: Vec<f64> = rows.iter().map(|&r| panel.p[r]).collect();
        let (vr, vp) = (variance(&in_r), variance(&in_p));
        let ratio_rivals = if var_r > 0.0 { vr / var_r } else { 0.0 };
        let ratio_price = if var_p > 0.0 { vp / var_p } else { 0.0 };
        let zeros = panel.q.iter().filter(|row| row[i] <= cfg.zero_tol).count();
        let zero_share = zeros as f64 / t as f64;
        firms.push(FirmDiagnostic {
            firm: i,
            q_floor: event.q_floor,
            epsilon: event.epsilon,
            n_band: event.n_band,
            var_rivals_band: vr,
            var_price_band: vp,
            ratio_rivals,
            ratio_price,
            zero_share,
            mass_point: zero_share > cfg.mass_tol,
            pass: ratio_rivals >= cfg.density_floor && ratio_price >= cfg.density_floor,
        });
    }
    let all_pass = firms.iter().all(|f| f.pass);
    let any_mass_point = firms.iter().any(|f| f.mass_point);
    Ok(PrivateInfoDiagnostics {
        firms,
        all_pass,
        any_mass_point,
    })
}
