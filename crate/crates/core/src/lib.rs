//! Estimation and specification testing for diffusion models with stochastic volatility.

// `!(x > 0.0)` guards reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod gof;
pub mod mcmc;
pub mod models;
pub mod particle;
pub mod rng;
pub mod simulate;
pub mod statespace;

pub use error::{Error, Result};
