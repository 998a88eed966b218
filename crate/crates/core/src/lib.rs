pub mod determinants;
pub mod conditioning;
pub mod error;
pub mod gamma_poisson;
pub mod gaussian;
pub mod lattice;
pub mod localization;
pub mod montecarlo;
pub mod numerics;
pub mod quadrature;
pub mod runner;
pub mod variational;

pub use error::{Error, Result};
