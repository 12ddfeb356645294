//! Spectral-temporal graph neural networks for multivariate time series:
//! graph and temporal spectral filters, a small reverse-mode autodiff engine,
//! training, temporal 1-WL analysis and synthetic data.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod temporal;
pub mod train;
pub mod twl;

pub use error::{Error, Result};
