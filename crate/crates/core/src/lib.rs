pub mod error;
pub mod free_dynamics;
pub mod grid;
pub mod oracle;
pub mod potentials;
pub mod quadrature;
pub mod scattering;
pub mod trajectory;
pub mod vecops;
pub mod xray;

pub use error::{Error, Result};

/// Crate version stamped into every output record.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
