//! Global-local shrinkage priors for the sparse normal means model.

pub mod config;
pub mod eb;
pub mod error;
pub mod experiments;
pub mod fb;
pub mod kernel;
pub mod manifest;
pub mod plot;
pub mod prior;
pub mod quadrature;
pub mod report;
pub mod special;
pub mod testing;
pub mod verify;

pub use error::{Error, Result};
pub use prior::{validate_spec, PriorChoice, PriorSpec, ValidationGrid, ValidationReport};
pub use quadrature::QuadratureConfig;
