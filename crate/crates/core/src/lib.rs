pub mod cli;
pub mod config;
pub mod error;
pub mod kinetics;
pub mod output;
pub mod pipeline;
pub mod propagator;
pub mod spin;
pub mod units;

pub use error::{Error, Result};
