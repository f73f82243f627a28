//! Characteristic functions on a uniform grid and Gil-Pelaez inversion.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::Univariate;
use crate::error::{invalid, Result};
use crate::quadrature::GaussLegendre;

/// `φ(k·dz)` for `k = 0..n`. Values at negative arguments follow from
/// `φ(-z) = conj φ(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFnGrid {
    pub dz: f64,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Inversion {
    pub points: Vec<f64>,
    pub cdf: Vec<f64>,
    pub warnings: Vec<String>,
}

impl CharFnGrid {
    pub fn new(dz: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(dz > 0.0) || values.len() < 3 {
            return Err(invalid(
                "characteristic function grid needs dz > 0 and at least 3 points",
            ));
        }
        Ok(Self { dz, values })
    }

    /// Tabulates `z ↦ f(z)` on `0, dz, …, z_max`.
    pub fn tabulate<F: FnMut(f64) -> Complex64>(dz: f64, z_max: f64, mut f: F) -> Result<Self> {
        let n = (z_max / dz).round() as usize;
        Self::new(dz, (0..=n).map(|k| f(k as f64 * dz)).collect())
    }

    pub fn z_max(&self) -> f64 {
        self.dz * (self.values.len() - 1) as f64
    }

    pub fn z(&self, k: usize) -> f64 {
        self.dz * k as f64
    }

    /// `F(x) = 1/2 - (1/π) ∫₀^∞ Im(e^{-izx} φ(z)) / z dz`, by the trapezoid
    /// rule on the grid. The integrand is even and smooth at zero, so its
    /// value there is Richardson-extrapolated from the first two nodes.
    pub fn invert(&self, points: &[f64], tail_tol: f64) -> Inversion {
        let mut warnings = Vec::new();
        let tail = self.values.last().map(|c| c.norm()).unwrap_or(0.0);
        if tail > tail_tol {
            warnings.push(format!(
                "|phi(z_max)| = {tail:.3e} exceeds {tail_tol:.1e}; grid too short"
            ));
        }
        let n = self.values.len();
        let mut cdf: Vec<f64> = points
            .iter()
            .map(|&x| {
                let g = |k: usize| {
                    let z = self.z(k);
                    let e = Complex64::from_polar(1.0, -z * x);
                    (e * self.values[k]).im / z
                };
                let g1 = g(1);
                let g2 = g(2);
                let g0 = (4.0 * g1 - g2) / 3.0;
                let mut s = 0.5 * g0;
                for k in 1..n - 1 {
                    s += g(k);
                }
                s += 0.5 * g(n - 1);
                0.5 - s * self.dz / PI
            })
            .collect();
        // Clip to [0, 1] and enforce monotonicity along sorted evaluation points.
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
        let mut run = 0.0f64;
        for &i in &order {
            run = run.max(cdf[i].clamp(0.0, 1.0));
            cdf[i] = run;
        }
        Inversion {
            points: points.to_vec(),
            cdf,
            warnings,
        }
    }
}

/// `E[e^{izX}]` for a law with bounded support, by composite Gauss–Legendre.
pub fn char_fn<D: Univariate + ?Sized>(
    dist: &D,
    z: f64,
    gl: &GaussLegendre,
    panels: usize,
) -> Complex64 {
    let (a, b) = dist.support();
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..panels {
        let lo = a + k as f64 * h;
        for (x, w) in gl.mapped(lo, lo + h) {
            acc += Complex64::from_polar(w * dist.density(x), z * x);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ScaledBeta;

    #[test]
    fn standard_normal_recovered() {
        let grid = CharFnGrid::tabulate(0.01, 40.0, |z| Complex64::new((-0.5 * z * z).exp(), 0.0))
            .unwrap();
        let xs: Vec<f64> = (-30..=30).map(|k| k as f64 / 10.0).collect();
        let inv = grid.invert(&xs, 1e-6);
        assert!(inv.warnings.is_empty());
        for (x, f) in xs.iter().zip(&inv.cdf) {
            let exact = 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2);
            assert!((f - exact).abs() < 1e-4, "x = {x}: {f} vs {exact}");
        }
    }

    #[test]
    fn uniform_recovered_from_quadrature_char_fn() {
        let d = ScaledBeta::new(1.0, 1.0, None, 2.0, -1.0).unwrap();
        let gl = GaussLegendre::new(64);
        let grid = CharFnGrid::tabulate(0.01, 400.0, |z| char_fn(&d, z, &gl, 8)).unwrap();
        let xs = [-0.5, 0.0, 0.25, 0.9];
        let inv = grid.invert(&xs, 1e-2);
        for (x, f) in xs.iter().zip(&inv.cdf) {
            assert!((f - (x + 1.0) / 2.0).abs() < 5e-3, "x = {x}: {f}");
        }
    }

    #[test]
    fn short_grid_warns() {
        let grid =
            CharFnGrid::tabulate(0.01, 1.0, |z| Complex64::new((-0.5 * z * z).exp(), 0.0)).unwrap();
        assert_eq!(grid.invert(&[0.0], 1e-3).warnings.len(), 1);
    }

    #[test]
    fn point_mass_gives_step() {
        let grid = CharFnGrid::tabulate(0.01, 400.0, |_| Complex64::new(1.0, 0.0)).unwrap();
        let inv = grid.invert(&[-0.5, 0.5], 1.1);
        assert!(inv.cdf[0] < 0.01 && inv.cdf[1] > 0.99);
    }
}
