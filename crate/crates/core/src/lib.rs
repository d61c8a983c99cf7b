pub mod birman_schwinger;
pub mod cli;
pub mod cyclicity;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod lattice;
pub mod linalg;
pub mod models;

pub use error::{Error, Result};
