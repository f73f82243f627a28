//! Maximum likelihood estimation, detrending and subsampling intervals.

pub mod detrend;
pub mod likelihood;
pub mod mle;
pub mod nelder_mead;
pub mod subsample;
