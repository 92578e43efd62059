//! System-dynamics model of the low-income rental housing market.

pub mod engine;
pub mod error;
pub mod model;
pub mod scenarios;
pub mod validation;

pub use error::{Error, Result};
