//! Exact steady-state evaluation and optimization of time-dependent express
//! shipment fees for a fulfillment center with stochastic capacity.

pub mod chain;
pub mod choice;
pub mod config;
pub mod error;
pub mod experiments;
pub mod measures;
pub mod optimize;
pub mod policy;
pub mod sim;
pub mod stochastics;
pub mod verify;

pub use error::{Error, Result};
