//! Variants of the model: conjectural variations, nonlinear inverse demand
//! and selective entry.

pub mod conduct;
pub mod entry;
pub mod loglinear;
pub mod nonlinear;

pub use conduct::{identify_conduct, ConditionalMeans, ConductEstimate};
pub use entry::{
    draw_entry, entry_frequency, recover_fv_given_s, selective_entry_outcomes, EntryDraw,
    EntryPanel, EntrySpec, SignalCostLaw, ThresholdTable,
};
pub use loglinear::{
    identify_fv_nonlinear, identify_lambda_nonlinear, identify_loglinear, Edge, LambdaConfig,
    LogLinearDemandId, NlSource, NonlinearFv, NonlinearIdentified, NonlinearLambda,
    NonlinearPopulation, SlopeProbe, DEFAULT_ALPHA_PAIRS,
};
pub use nonlinear::{
    simulate_nonlinear_panel, solve_nonlinear_equilibrium, InverseDemand, NonlinearDemandSpec,
    NonlinearEquilibrium, NonlinearModel, SolverConfig, StrategyGrid,
};
