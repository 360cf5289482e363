pub mod analysis;
pub mod elliptic;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod lattice;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};
