pub mod bsde;
pub mod error;
pub mod fd;
pub mod harness;
pub mod regression;
pub mod report;
pub mod stochastic;
pub mod sublinear;
pub mod value;

pub use error::{Error, Result};
