pub mod effective;
pub mod error;
pub mod invariants;
pub mod linalg;
pub mod model;
pub mod statmech;
pub mod sweep;
pub mod symmetry;

pub use error::{Error, Result};
