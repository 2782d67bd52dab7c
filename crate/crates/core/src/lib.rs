pub mod blockgraph;
pub mod cli;
pub mod error;
pub mod format;
pub mod linalg;
pub mod lqr_models;
pub mod riccati;
pub mod rng;
pub mod sampling;
pub mod sdre;
pub mod valuefn;

pub use error::{Error, Result};
