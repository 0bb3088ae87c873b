pub mod embedding;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod models;
pub mod operators;
pub mod pde;
pub mod presets;
pub mod random;
pub mod regularization;
pub mod suite;
pub mod tcc;

pub use error::{Error, Result};
