//! Binary classifiers that stay accurate when the people being classified
//! can hide features from them.

pub mod baselines;
pub mod empirical;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod flow;
pub mod harness;
pub mod linear;
pub mod mdlp;
pub mod mincut;
pub mod strategic;
mod textio;
pub mod transform;

pub use error::{Error, Result};
