//! The JSON run configuration. Every block has defaults, so `{}` is a valid
//! config describing the twenty-firm Monte Carlo design.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

use cournot_core::distributions::{Law, ScaledBeta};
use cournot_core::estimation::detrend::DetrendConfig;
use cournot_core::estimation::mle::EstimationConfig;
use cournot_core::estimation::subsample::SubsampleConfig;
use cournot_core::extensions::{
    EntrySpec, LambdaConfig, NonlinearDemandSpec, NonlinearModel, SignalCostLaw, SolverConfig,
    ThresholdTable, DEFAULT_ALPHA_PAIRS,
};
use cournot_core::identification::{BandRule, IdentifyConfig};
use cournot_core::montecarlo::MonteCarloConfig;
use cournot_core::simulator::{InfoRegime, TrendSpec};
use cournot_core::theta::{StructuralModel, ThetaParam};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Data generating process for `simulate`, population `identify`,
    /// conduct and `counterfactual` without estimates.
    pub design: Design,
    pub theta: ThetaParam,
    /// Defaults to no trend.
    pub trend: Option<TrendSpec>,
    pub simulate: SimulateConfig,
    pub identify: IdentifyConfig,
    pub detrend: DetrendConfig,
    pub estimation: EstimationConfig,
    pub subsample: SubsampleConfig,
    pub counterfactual: CounterfactualConfig,
    pub montecarlo: MonteCarloConfig,
    pub cluster: ClusterConfig,
    pub extensions: ExtensionsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            design: Design::Theta,
            theta: ThetaParam::mc_design(),
            trend: None,
            simulate: SimulateConfig::default(),
            identify: IdentifyConfig::default(),
            detrend: DetrendConfig::default(),
            estimation: EstimationConfig::default(),
            subsample: SubsampleConfig::default(),
            counterfactual: CounterfactualConfig::default(),
            montecarlo: MonteCarloConfig::default(),
            cluster: ClusterConfig::default(),
            extensions: ExtensionsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(cournot_core::Error::from)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn model(&self) -> cournot_core::Result<StructuralModel> {
        match self.design {
            Design::Theta => self.theta.model(),
            Design::BoundaryDesign => Ok(StructuralModel::boundary_design()),
        }
    }

    pub fn n_firms(&self) -> usize {
        match self.design {
            Design::Theta => self.theta.n_firms(),
            Design::BoundaryDesign => StructuralModel::boundary_design().n_firms(),
        }
    }

    pub fn trend(&self) -> TrendSpec {
        self.trend
            .clone()
            .unwrap_or_else(|| TrendSpec::none(self.n_firms()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    /// The parametric model described by `theta`.
    Theta,
    /// Two firms with U-shaped shock densities, so that boundary events are
    /// well populated in moderate samples.
    BoundaryDesign,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub t_len: usize,
    pub seed: u64,
    pub regime: InfoRegime,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            t_len: 350,
            seed: 1,
            regime: InfoRegime::Private,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualConfig {
    pub t_sim: usize,
    pub n_sims: usize,
    pub seed: u64,
    /// Firm grouping for the per-group output series; `None` uses the
    /// parameter vector's own groups.
    pub groups: Option<Vec<usize>>,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        Self {
            t_sim: 350,
            n_sims: 100,
            seed: 7,
            groups: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { k: 2, seed: 0 }
    }
}

/// A compactly supported shock law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShockSpec {
    Point { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Beta { a: f64, b: f64, lo: f64, hi: f64 },
}

impl ShockSpec {
    pub fn law(&self) -> cournot_core::Result<Law> {
        match *self {
            ShockSpec::Point { value } => Ok(Law::Point(value)),
            ShockSpec::Uniform { lo, hi } => Ok(Law::Beta(ScaledBeta::new(1.0, 1.0, None, hi - lo, lo)?)),
            ShockSpec::Beta { a, b, lo, hi } => Ok(Law::Beta(ScaledBeta::new(a, b, None, hi - lo, lo)?)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearConfig {
    pub demand: NonlinearDemandSpec,
    pub lambda: f64,
    pub v: Vec<ShockSpec>,
    pub w: ShockSpec,
    pub u: ShockSpec,
    pub solver: SolverConfig,
    /// Market at which `extensions solve` reports strategies; `None` takes
    /// the midpoints of the supports.
    pub at: Option<(f64, f64)>,
    pub alpha_pairs: Vec<(f64, f64)>,
    pub lambda_id: LambdaConfig,
    pub report_alpha: Vec<f64>,
    pub band: BandRule,
    pub t_len: usize,
    pub seed: u64,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        Self {
            demand: NonlinearDemandSpec::LogLinear { beta: 0.5 },
            lambda: 0.5,
            v: vec![ShockSpec::Uniform { lo: 0.2, hi: 0.8 }; 2],
            w: ShockSpec::Uniform { lo: -0.2, hi: 0.2 },
            u: ShockSpec::Uniform { lo: 2.0, hi: 3.0 },
            solver: SolverConfig::default(),
            at: None,
            alpha_pairs: DEFAULT_ALPHA_PAIRS.to_vec(),
            lambda_id: LambdaConfig::default(),
            report_alpha: (1..20).map(|k| k as f64 / 20.0).collect(),
            band: BandRule::default(),
            t_len: 2000,
            seed: 11,
        }
    }
}

impl NonlinearConfig {
    pub fn model(&self) -> cournot_core::Result<NonlinearModel> {
        let m = NonlinearModel {
            demand: self.demand,
            lambda: self.lambda,
            v_laws: self.v.iter().map(ShockSpec::law).collect::<cournot_core::Result<_>>()?,
            w_law: self.w.law()?,
            u_law: self.u.law()?,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConductConfig {
    /// True conduct used to generate population moments; its first entry
    /// is also taken as the known normalization.
    pub kappa: Vec<f64>,
    /// Demand levels to difference; `None` takes the quartiles of `U`.
    pub u_pair: Option<(f64, f64)>,
    pub band: BandRule,
}

impl Default for ConductConfig {
    fn default() -> Self {
        Self {
            kappa: Vec::new(),
            u_pair: None,
            band: BandRule::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntryConfig {
    pub spec: EntrySpec,
    pub n_firms: usize,
    pub beta: f64,
    pub lambda: f64,
    pub w: ShockSpec,
    pub u: ShockSpec,
    pub t_len: usize,
    pub seed: u64,
}

impl Default for EntryConfig {
    fn default() -> Self {
        Self {
            spec: EntrySpec {
                signal_cost: SignalCostLaw::BetaIndex {
                    lo: 0.5,
                    hi: 1.5,
                    a0: 1.0,
                    gamma: 1.0,
                    b: 2.0,
                },
                threshold: ThresholdTable {
                    c: vec![0.0, 1.0],
                    s: vec![0.8, 0.3],
                },
                c_bounds: (0.0, 1.0),
            },
            n_firms: 3,
            beta: 0.5,
            lambda: 0.1,
            w: ShockSpec::Uniform { lo: -0.2, hi: 0.2 },
            u: ShockSpec::Uniform { lo: 20.0, hi: 25.0 },
            t_len: 5000,
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtensionsConfig {
    pub nonlinear: NonlinearConfig,
    pub conduct: ConductConfig,
    pub entry: EntryConfig,
}
