pub mod analytic;
pub mod basis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod fidelity;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod ode;
pub mod quadrature;
pub mod trapfield;
pub mod validation;

pub use error::{Error, Result};
