//! Python bindings. Panels cross the boundary as `(p, q)` with `q` a list of
//! rows; structured results come back as JSON strings for `json.loads`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cournot_core::estimation::likelihood::log_likelihood;
use cournot_core::estimation::mle::{estimate as mle, EstimationConfig};
use cournot_core::identification::{identify, test_private_information, DiagnosticConfig, IdentifyConfig, Source};
use cournot_core::model::{LinearEquilibrium, MarketDraw, PriceFloorPolicy};
use cournot_core::panel::Panel;
use cournot_core::quadrature::GaussLegendre;
use cournot_core::simulator::{simulate_regime, InfoRegime, TrendSpec};
use cournot_core::theta::ThetaParam;
use cournot_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonConvergence(_) | Error::Singular(_) | Error::Numerical(_) | Error::Infeasible(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| to_py(e.into()))
}

fn theta_from(theta: Option<&str>) -> PyResult<ThetaParam> {
    match theta {
        None => Ok(ThetaParam::mc_design()),
        Some(s) => {
            let t: ThetaParam = serde_json::from_str(s).map_err(|e| to_py(e.into()))?;
            t.validate().map_err(to_py)?;
            Ok(t)
        }
    }
}

fn panel_from(p: Vec<f64>, q: Vec<Vec<f64>>) -> PyResult<Panel> {
    Panel::new(p, q).map_err(to_py)
}

/// Parameters of the twenty-firm Monte Carlo design as JSON.
#[pyfunction]
fn mc_design() -> PyResult<String> {
    json(&ThetaParam::mc_design())
}

/// Simulates `t_len` markets; returns `(p, q)`.
#[pyfunction]
#[pyo3(signature = (t_len, seed, theta=None, complete=false))]
fn simulate(
    py: Python<'_>,
    t_len: usize,
    seed: u64,
    theta: Option<&str>,
    complete: bool,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let model = theta_from(theta)?.model().map_err(to_py)?;
    let regime = if complete { InfoRegime::Complete } else { InfoRegime::Private };
    let sim = py
        .detach(|| simulate_regime(&model, &TrendSpec::none(model.n_firms()), t_len, seed, regime))
        .map_err(to_py)?;
    Ok((sim.panel.p, sim.panel.q))
}

/// Equilibrium outputs of one market under private information.
#[pyfunction]
#[pyo3(signature = (v, w, u, theta=None))]
fn equilibrium(v: Vec<f64>, w: f64, u: f64, theta: Option<&str>) -> PyResult<Vec<f64>> {
    let model = theta_from(theta)?.model().map_err(to_py)?;
    let eq = LinearEquilibrium::with_policy(&model.primitives(), PriceFloorPolicy::CheckRealized).map_err(to_py)?;
    eq.quantities(&MarketDraw { v, w, u }).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (p, q, theta=None, gl_nodes=64))]
fn loglik(p: Vec<f64>, q: Vec<Vec<f64>>, theta: Option<&str>, gl_nodes: usize) -> PyResult<f64> {
    let panel = panel_from(p, q)?;
    let theta = theta_from(theta)?;
    Ok(log_likelihood(&theta, &panel, &GaussLegendre::new(gl_nodes)).map_err(to_py)?.value)
}

/// Private-information diagnostics as JSON.
#[pyfunction]
fn check(p: Vec<f64>, q: Vec<Vec<f64>>) -> PyResult<String> {
    let panel = panel_from(p, q)?;
    json(&test_private_information(&panel, &DiagnosticConfig::default()).map_err(to_py)?)
}

/// Nonparametric identification report as JSON, from a panel or, when `p`
/// and `q` are omitted, from the population law of `theta`.
#[pyfunction]
#[pyo3(signature = (p=None, q=None, theta=None, config=None))]
fn identify_report(
    py: Python<'_>,
    p: Option<Vec<f64>>,
    q: Option<Vec<Vec<f64>>>,
    theta: Option<&str>,
    config: Option<&str>,
) -> PyResult<String> {
    let cfg: IdentifyConfig = match config {
        Some(s) => serde_json::from_str(s).map_err(|e| to_py(e.into()))?,
        None => IdentifyConfig::default(),
    };
    let report = match (p, q) {
        (Some(p), Some(q)) => {
            let panel = panel_from(p, q)?;
            py.detach(|| identify(&Source::Sample { panel: &panel, band: cfg.band }, &cfg))
        }
        (None, None) => {
            let model = theta_from(theta)?.model().map_err(to_py)?;
            py.detach(|| identify(&Source::Population(&model), &cfg))
        }
        _ => return Err(PyValueError::new_err("pass both p and q, or neither")),
    }
    .map_err(to_py)?;
    json(&report)
}

/// Maximum likelihood estimate as JSON, searching from `theta`.
#[pyfunction]
#[pyo3(signature = (p, q, theta=None, config=None))]
fn estimate(
    py: Python<'_>,
    p: Vec<f64>,
    q: Vec<Vec<f64>>,
    theta: Option<&str>,
    config: Option<&str>,
) -> PyResult<String> {
    let panel = panel_from(p, q)?;
    let start = theta_from(theta)?;
    let cfg: EstimationConfig = match config {
        Some(s) => serde_json::from_str(s).map_err(|e| to_py(e.into()))?,
        None => EstimationConfig::default(),
    };
    json(&py.detach(|| mle(&panel, &start, &cfg)).map_err(to_py)?)
}

#[pymodule]
fn cournot_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(mc_design, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(loglik, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(identify_report, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    Ok(())
}
