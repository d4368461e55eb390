//! Gradient-boosted trees that learn the parameters of classical time-series
//! models.
//!
//! Instead of forecasting values directly, the boosted ensembles in this crate
//! emit per-observation parameters of a fixed target model (AR(p), damped
//! multiplicative ETS, or a trend + Fourier decomposition). The target model
//! turns those parameters into fitted values and forecasts, and the gradients
//! and Hessians of its loss with respect to the parameters drive the trees.
//!
//! Two architectures are provided:
//!
//! - [`hypertree`]: one boosted ensemble per target-model parameter.
//! - [`treenet`]: a low-dimensional tree embedding, a fixed random projection
//!   and a shallow MLP decoding the embedding into parameters.
//!
//! The boosting engine ([`boosting`]) is a small exact-enumeration Newton
//! booster that accepts externally supplied gradients and Hessians.

pub mod baselines;
pub mod bench;
pub mod boosting;
pub mod data;
pub mod datasets;
mod error;
pub mod export;
pub mod forecast;
pub mod grad;
pub mod hypertree;
pub mod metrics;
pub mod seed;
pub mod targets;
pub mod treenet;

pub use error::{Error, ErrorCategory, Result};
