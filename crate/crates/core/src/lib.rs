pub mod cli;
pub mod copula;
pub mod data;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod measures;
pub mod numerics;
pub mod randomfields;
pub mod simulate;
pub mod tailtheory;

pub use error::{Error, Result};
