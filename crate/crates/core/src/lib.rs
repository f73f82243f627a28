pub mod distributions;
pub mod error;
pub mod model;
pub mod quadrature;

pub use error::{Error, Result};
pub mod counterfactual;
pub mod estimation;
pub mod extensions;
pub mod identification;
pub mod montecarlo;
pub mod panel;
pub mod simulator;
pub mod stats;
pub mod theta;
