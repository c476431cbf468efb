pub mod analysis;
pub mod assembly;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod ife;
pub mod lagrange;
pub mod mesh;
pub mod poly;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod study;

pub use error::{Error, Result};
