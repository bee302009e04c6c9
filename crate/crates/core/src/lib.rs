pub mod analysis;
pub mod error;
pub mod geometry;
pub mod instances;
pub mod rng;
pub mod solver;
pub mod sphere;
pub mod stiefel;
pub mod symmat;

pub use error::{Error, Result};
pub use symmat::SymmetricMatrix;
