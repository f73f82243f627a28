//! Characteristic function of the common cost shock given demand, and the
//! implied conditional CDF.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::boundary::{equilibrium, BandRule};
use super::{Identified, QuantileTable, Source};
use crate::distributions::charfn::CharFnGrid;
use crate::distributions::{Law, Univariate};
use crate::error::{invalid, Error, Result};
use crate::panel::Panel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhiConfig {
    pub dz: f64,
    pub z_max: f64,
    /// Points where the denominator has modulus below this are dropped.
    pub phi_floor: f64,
    /// A run of dropped points longer than this (in `z` units) ends the grid.
    pub max_gap: f64,
    /// Warn when `|φ(z_cut)|` exceeds this.
    pub tail_tol: f64,
    /// Cells of the uniform quantile-level grid used for the model laws.
    pub alpha_cells: usize,
    /// A recovered `φ` within this distance of `e^{izc}` on the whole grid
    /// is read as a point mass at `c`.
    pub point_mass_tol: f64,
}

impl Default for PhiConfig {
    fn default() -> Self {
        Self {
            dz: 0.01,
            z_max: 400.0,
            phi_floor: 1e-3,
            max_gap: 0.5,
            tail_tol: 1e-2,
            alpha_cells: 4000,
            point_mass_tol: 1e-6,
        }
    }
}

impl PhiConfig {
    pub fn alpha_grid(&self) -> Vec<f64> {
        let n = self.alpha_cells.max(1);
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }
}

/// Characteristic function of a law whose quantile function is the linear
/// interpolant of `(α_k, x_k)`: each piece is uniform, so
/// `φ(s) = Σ Δα_k e^{is m_k} sinc(s h_k)` with `m_k` the midpoint and `h_k`
/// the half-width of the piece.
#[derive(Debug, Clone)]
pub struct PwlCharFn {
    weight: Vec<f64>,
    mid: Vec<f64>,
    half: Vec<f64>,
}

impl PwlCharFn {
    pub fn from_quantiles(alpha: &[f64], x: &[f64]) -> Result<Self> {
        if alpha.len() != x.len() || alpha.len() < 2 {
            return Err(invalid("quantile table needs at least two matching points"));
        }
        let mut weight = Vec::with_capacity(alpha.len() - 1);
        let mut mid = Vec::with_capacity(alpha.len() - 1);
        let mut half = Vec::with_capacity(alpha.len() - 1);
        let total = alpha[alpha.len() - 1] - alpha[0];
        if !(total > 0.0) {
            return Err(invalid("quantile levels must increase"));
        }
        for k in 0..alpha.len() - 1 {
            let da = alpha[k + 1] - alpha[k];
            if da < 0.0 {
                return Err(invalid("quantile levels must increase"));
            }
            weight.push(da / total);
            mid.push(0.5 * (x[k] + x[k + 1]));
            half.push(0.5 * (x[k + 1] - x[k]).abs());
        }
        Ok(Self { weight, mid, half })
    }

    /// Same law after `x ↦ scale · (x - centre)`.
    pub fn affine(mut self, centre: f64, scale: f64) -> Self {
        for m in &mut self.mid {
            *m = scale * (*m - centre);
        }
        for h in &mut self.half {
            *h *= scale.abs();
        }
        self
    }

    pub fn eval(&self, s: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..self.weight.len() {
            acc += Complex64::from_polar(self.weight[k] * sinc(s * self.half[k]), s * self.mid[k]);
        }
        acc
    }

    /// Values at `0, ds, 2ds, …` by rotating per-piece phases.
    pub fn stepper(&self, ds: f64) -> PwlStepper<'_> {
        let n = self.weight.len();
        PwlStepper {
            cf: self,
            s: 0.0,
            ds,
            steps: 0,
            rot_mid: vec![Complex64::new(1.0, 0.0); n],
            rot_half: vec![Complex64::new(1.0, 0.0); n],
            step_mid: self
                .mid
                .iter()
                .map(|m| Complex64::from_polar(1.0, ds * m))
                .collect(),
            step_half: self
                .half
                .iter()
                .map(|h| Complex64::from_polar(1.0, ds * h))
                .collect(),
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

pub struct PwlStepper<'a> {
    cf: &'a PwlCharFn,
    s: f64,
    ds: f64,
    steps: usize,
    rot_mid: Vec<Complex64>,
    rot_half: Vec<Complex64>,
    step_mid: Vec<Complex64>,
    step_half: Vec<Complex64>,
}

impl PwlStepper<'_> {
    /// Returns `φ(s)` at the current point and advances.
    pub fn next_value(&mut self) -> Complex64 {
        // Re-anchor periodically so rounding in the rotations cannot build up.
        if self.steps % 4096 == 0 && self.steps > 0 {
            for k in 0..self.rot_mid.len() {
                self.rot_mid[k] = Complex64::from_polar(1.0, self.s * self.cf.mid[k]);
                self.rot_half[k] = Complex64::from_polar(1.0, self.s * self.cf.half[k]);
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..self.rot_mid.len() {
            let x = self.s * self.cf.half[k];
            let sc = if x.abs() < 1e-4 {
                1.0 - x * x / 6.0
            } else {
                self.rot_half[k].im / x
            };
            acc += self.rot_mid[k] * (self.cf.weight[k] * sc);
            self.rot_mid[k] *= self.step_mid[k];
            self.rot_half[k] *= self.step_half[k];
        }
        self.steps += 1;
        self.s = self.steps as f64 * self.ds;
        acc
    }
}

/// Empirical characteristic function stepped over `0, ds, 2ds, …`.
struct EmpiricalStepper {
    rot: Vec<Complex64>,
    step: Vec<Complex64>,
    x: Vec<f64>,
    ds: f64,
    steps: usize,
}

impl EmpiricalStepper {
    fn new(x: Vec<f64>, ds: f64) -> Self {
        Self {
            rot: vec![Complex64::new(1.0, 0.0); x.len()],
            step: x
                .iter()
                .map(|v| Complex64::from_polar(1.0, ds * v))
                .collect(),
            x,
            ds,
            steps: 0,
        }
    }

    fn next_value(&mut self) -> Complex64 {
        if self.steps % 4096 == 0 && self.steps > 0 {
            let s = self.steps as f64 * self.ds;
            for (r, v) in self.rot.iter_mut().zip(&self.x) {
                *r = Complex64::from_polar(1.0, s * v);
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (r, st) in self.rot.iter_mut().zip(&self.step) {
            acc += *r;
            *r *= st;
        }
        self.steps += 1;
        acc / self.x.len() as f64
    }
}

/// `φ_{W|U}(·|u)` on a grid, with bookkeeping on the regularization.
#[derive(Debug, Clone)]
pub struct PhiW {
    pub firm: usize,
    pub u: f64,
    pub grid: CharFnGrid,
    /// Largest `z` retained.
    pub z_cut: f64,
    /// Grid points where the denominator fell below the floor and the ratio
    /// was interpolated.
    pub n_dropped: usize,
    /// Observations in the demand band (sample mode).
    pub n_band: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiSummary {
    pub firm: usize,
    pub u: f64,
    pub z_cut: f64,
    pub n_dropped: usize,
    pub n_band: usize,
    pub warnings: Vec<String>,
}

impl PhiW {
    pub fn summary(&self) -> PhiSummary {
        PhiSummary {
            firm: self.firm,
            u: self.u,
            z_cut: self.z_cut,
            n_dropped: self.n_dropped,
            n_band: self.n_band,
            warnings: self.warnings.clone(),
        }
    }
}

// Numerator `E[exp{-iz D̂ Q_i + iz(U - u)} | U ≈ u]`, stepped in `z`.
enum Numerator<'a> {
    Model {
        shift: f64,
        w: PwlStepper<'a>,
        v: PwlStepper<'a>,
        dz: f64,
        k: usize,
    },
    Sample(EmpiricalStepper),
}

impl Numerator<'_> {
    fn next_value(&mut self) -> Complex64 {
        match self {
            Numerator::Model { shift, w, v, dz, k } => {
                let z = *k as f64 * *dz;
                *k += 1;
                Complex64::from_polar(1.0, -z * *shift) * w.next_value() * v.next_value()
            }
            Numerator::Sample(s) => s.next_value(),
        }
    }
}

/// Deconvolves firm `i`'s output at demand level `u`:
/// `φ_{W|U}(z|u) = e^{iz(u - Â_i)} E[e^{-izD̂Q_i} | U = u] / E[e^{izD̂(V_i - μ̂_i)/(λ̂ + 2β̂)}]`,
/// with `D̂ = λ̂ + (I + 1)β̂`, `Â_i = [(λ̂ + Iβ̂)μ̂_i - β̂Σ_{j≠i}μ̂_j]/(λ̂ + β̂)` and the
/// denominator computed from the recovered quantile table of `V_i`.
///
/// Where the denominator's modulus falls below `phi_floor` the ratio is not
/// computed; short runs of such points are bridged by linear interpolation
/// and the grid ends at the first run longer than `max_gap`.
pub fn identify_phi_w(
    source: &Source,
    i: usize,
    u: f64,
    fv: &QuantileTable,
    id: &Identified,
    cfg: &PhiConfig,
) -> Result<PhiW> {
    let n = id.mu_v.len();
    if i >= n || fv.firm != i {
        return Err(invalid(format!(
            "quantile table for firm {} cannot deconvolve firm {i}",
            fv.firm
        )));
    }
    if !(cfg.dz > 0.0 && cfg.z_max > 2.0 * cfg.dz && cfg.phi_floor > 0.0) {
        return Err(invalid(
            "phi grid needs dz > 0, z_max > 2 dz and a positive floor",
        ));
    }
    let (beta, lambda) = (id.beta, id.lambda);
    let d_hat = lambda + (n as f64 + 1.0) * beta;
    let own_hat = lambda + 2.0 * beta;
    let a_hat = {
        let others: f64 = id.mu_v.iter().sum::<f64>() - id.mu_v[i];
        ((lambda + n as f64 * beta) * id.mu_v[i] - beta * others) / (lambda + beta)
    };
    let den_cf =
        PwlCharFn::from_quantiles(&fv.alpha, &fv.values)?.affine(id.mu_v[i], d_hat / own_hat);

    // Model laws for the numerator are tabulated on the same quantile levels
    // as the recovered table, so discretization effects cancel in the ratio.
    let w_tab;
    let v_tab;
    let mut n_band = 0;
    let mut num = match source {
        Source::Population(model) => {
            if model.n_firms() != n {
                return Err(invalid("identified parameters do not match the model"));
            }
            let eq = equilibrium(model)?;
            let prim = eq.primitives();
            if u < prim.u_lower {
                return Err(invalid(format!(
                    "u = {u} below the demand floor {}",
                    prim.u_lower
                )));
            }
            let d = prim.big_d();
            let r = d_hat / d;
            let w_law = model.w_shock.given(u)?;
            let alpha = cfg.alpha_grid();
            w_tab = PwlCharFn::from_quantiles(&alpha, &quantiles(&w_law, &alpha)?)?.affine(0.0, r);
            v_tab = PwlCharFn::from_quantiles(&fv.alpha, &quantiles(&model.v_laws[i], &fv.alpha)?)?
                .affine(prim.mu_v[i], d_hat / prim.own_slope());
            // -D̂ Q_i = -r(u - A_i) + r W + (D̂/own)(V_i - μ_i); the factor
            // e^{iz(u - Â_i)} is applied below, so the numerator carries
            // e^{-iz r(u - A_i)} only.
            let shift = r * (u - eq.a_coefs()[i]);
            Numerator::Model {
                shift,
                w: w_tab.stepper(cfg.dz),
                v: v_tab.stepper(cfg.dz),
                dz: cfg.dz,
                k: 0,
            }
        }
        Source::Sample { panel, band } => {
            let (rows, x) = demand_band(panel, i, u, beta, d_hat, band)?;
            n_band = rows;
            Numerator::Sample(EmpiricalStepper::new(x, cfg.dz))
        }
    };
    // In sample mode the per-row demand correction already centres on u.
    let centre = match source {
        Source::Population(_) => u - a_hat,
        Source::Sample { .. } => -a_hat,
    };

    let mut den = den_cf.stepper(cfg.dz);
    let n_max = (cfg.z_max / cfg.dz).round() as usize;
    let max_gap = (cfg.max_gap / cfg.dz).ceil() as usize;
    let mut values: Vec<Option<Complex64>> = Vec::new();
    let mut gap = 0usize;
    let mut last_valid = 0usize;
    for k in 0..=n_max {
        let z = k as f64 * cfg.dz;
        let nu = num.next_value();
        let de = den.next_value();
        if de.norm() >= cfg.phi_floor {
            values.push(Some(Complex64::from_polar(1.0, z * centre) * nu / de));
            last_valid = k;
            gap = 0;
        } else {
            values.push(None);
            gap += 1;
            if gap > max_gap {
                break;
            }
        }
    }
    values.truncate(last_valid + 1);
    if values.len() < 3 {
        return Err(Error::Numerical(format!(
            "denominator below {} immediately; no usable characteristic function grid",
            cfg.phi_floor
        )));
    }
    let n_dropped = values.iter().filter(|v| v.is_none()).count();
    let filled = bridge_gaps(&values);
    let z_cut = (filled.len() - 1) as f64 * cfg.dz;
    let mut warnings = Vec::new();
    if last_valid < n_max {
        warnings.push(format!(
            "denominator below {:.1e} beyond z = {z_cut:.2}; grid truncated",
            cfg.phi_floor
        ));
    }
    let grid = CharFnGrid::new(cfg.dz, filled)?;
    Ok(PhiW {
        firm: i,
        u,
        grid,
        z_cut,
        n_dropped,
        n_band,
        warnings,
    })
}

fn quantiles(law: &Law, alpha: &[f64]) -> Result<Vec<f64>> {
    alpha.iter().map(|&a| law.quantile(a)).collect()
}

// Rows whose recovered demand shock is nearest to `u`, and for each the
// exponent `u_t - u - D̂ Q_it`.
fn demand_band(
    panel: &Panel,
    i: usize,
    u: f64,
    beta: f64,
    d_hat: f64,
    band: &BandRule,
) -> Result<(usize, Vec<f64>)> {
    if i >= panel.n_firms() {
        return Err(invalid(format!("firm {i} out of range")));
    }
    let shocks = panel.demand_shocks(beta);
    let (rows, _) = band.centred_band(&shocks, u)?;
    let x = rows
        .iter()
        .map(|&r| shocks[r] - d_hat * panel.q[r][i])
        .collect();
    Ok((rows.len(), x))
}

fn bridge_gaps(values: &[Option<Complex64>]) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::with_capacity(values.len());
    let mut k = 0;
    while k < values.len() {
        match values[k] {
            Some(v) => {
                out.push(v);
                k += 1;
            }
            None => {
                let start = k;
                while k < values.len() && values[k].is_none() {
                    k += 1;
                }
                let left = out.last().copied().unwrap_or(Complex64::new(1.0, 0.0));
                let right = values.get(k).copied().flatten().unwrap_or(left);
                let len = (k - start + 1) as f64;
                for m in start..k {
                    let t = (m - start + 1) as f64 / len;
                    out.push(left + (right - left) * t);
                }
            }
        }
    }
    out
}

/// `F_{W|U}(·|u)` at the requested points, via Gil-Pelaez inversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalCdf {
    pub firm: usize,
    pub u: f64,
    pub points: Vec<f64>,
    pub cdf: Vec<f64>,
    pub z_cut: f64,
    pub warnings: Vec<String>,
}

pub fn fw_given_u(phi: &PhiW, points: &[f64], cfg: &PhiConfig) -> ConditionalCdf {
    let mut warnings = phi.warnings.clone();
    let cdf = match point_mass(&phi.grid, cfg.point_mass_tol) {
        // Gil-Pelaez smears a jump over ~1/z_cut; a cf of unit modulus on an
        // interval can only come from a point mass, so return the step.
        Some(c) => {
            warnings.push(format!("characteristic function has unit modulus; point mass at {c:.6}"));
            points.iter().map(|&x| if x >= c { 1.0 } else { 0.0 }).collect()
        }
        None => {
            let inv = phi.grid.invert(points, cfg.tail_tol);
            warnings.extend(inv.warnings);
            inv.cdf
        }
    };
    ConditionalCdf {
        firm: phi.firm,
        u: phi.u,
        points: points.to_vec(),
        cdf,
        z_cut: phi.z_cut,
        warnings,
    }
}

/// Location `c` when `φ(z) = e^{izc}` on every grid point, to within `tol`.
fn point_mass(grid: &CharFnGrid, tol: f64) -> Option<f64> {
    let c = grid.values[1].arg() / grid.dz;
    grid.values
        .iter()
        .enumerate()
        .all(|(k, v)| (v - Complex64::from_polar(1.0, grid.z(k) * c)).norm() <= tol)
        .then_some(c)
}

/// `F_{W,U}(w, u) = ∫_{u̲}^{u} F_{W|U}(w|s) dF_U(s)`. The population measure
/// is integrated by Gauss–Legendre on `[u̲, u]`; in a sample the recovered
/// demand shocks below `u` are split into `nodes` equal-count bins, each
/// represented by its median.
pub fn joint_cdf_wu(
    source: &Source,
    i: usize,
    w: &[f64],
    u: f64,
    fv: &QuantileTable,
    id: &Identified,
    cfg: &PhiConfig,
    nodes: usize,
) -> Result<Vec<f64>> {
    let measure: Vec<(f64, f64)> = match source {
        Source::Population(model) => {
            let lo = model.u_law.support().0;
            if u <= lo {
                return Ok(vec![0.0; w.len()]);
            }
            if let Law::Point(c) = model.u_law {
                vec![(c, 1.0)]
            } else {
                let gl = crate::quadrature::GaussLegendre::new(nodes.max(1));
                gl.mapped(lo, u)
                    .map(|(s, wt)| (s, wt * model.u_law.density(s)))
                    .collect()
            }
        }
        Source::Sample { panel, .. } => {
            let mut below: Vec<f64> = panel
                .demand_shocks(id.beta)
                .into_iter()
                .filter(|&s| s <= u)
                .collect();
            if below.is_empty() {
                return Ok(vec![0.0; w.len()]);
            }
            below.sort_by(f64::total_cmp);
            let t = panel.len() as f64;
            let bins = nodes.clamp(1, below.len());
            (0..bins)
                .map(|b| {
                    let lo = b * below.len() / bins;
                    let hi = (b + 1) * below.len() / bins;
                    let med = below[(lo + hi) / 2];
                    (med, (hi - lo) as f64 / t)
                })
                .collect()
        }
    };
    let mut out = vec![0.0; w.len()];
    for (s, wt) in measure {
        let phi = identify_phi_w(source, i, s, fv, id, cfg)?;
        let c = fw_given_u(&phi, w, cfg);
        for (o, f) in out.iter_mut().zip(&c.cdf) {
            *o += wt * f;
        }
    }
    for o in &mut out {
        *o = o.clamp(0.0, 1.0);
    }
    Ok(out)
}
