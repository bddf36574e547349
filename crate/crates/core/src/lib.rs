pub mod cli;
pub mod concavity;
pub mod error;
pub mod extremal;
pub mod functionals;
pub mod grid;
pub mod heatflow;
pub mod identities;
pub mod inequalities;
pub mod mixtures;
pub mod numerics;

pub use error::{Error, Result};
