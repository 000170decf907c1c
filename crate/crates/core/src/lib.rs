//! Streaming posterior sampling with variance-reduced stochastic-gradient
//! Langevin dynamics.

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod models;
pub mod numerics;
pub mod offline;
pub mod online;
pub mod saga;

pub use error::{Error, Result};
pub use models::{EvalCounter, FunctionTerm, ModelStream};
pub use numerics::{GaussianApprox, Matrix, RngStream, Vector};
