pub mod capacities;
pub mod cli;
pub mod cylinder;
pub mod deviations;
pub mod error;
pub mod geometry;
pub mod lattice;
pub mod maxflow;
pub mod nu;
pub mod oracle;
pub mod stats;
pub mod surface;

pub use error::{Error, Result};
