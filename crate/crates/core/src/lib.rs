//! Protection coordination for radial distribution feeders with distributed
//! generation.

pub mod cli;
pub mod coordination;
pub mod curves;
pub mod error;
pub mod fault;
pub mod fixtures;
pub mod format;
pub mod grid;
pub mod optimizer;
pub mod powerflow;
pub mod report;
pub mod study;

pub use error::{Error, Result};
