pub mod cli;
pub mod corpus;
pub mod emissions;
pub mod error;
pub mod evalmetrics;
pub mod experiments;
pub mod lattice;
pub mod model;
pub mod objectives;
pub mod tagspace;
pub mod trainer;
pub mod unify;

pub use error::{Error, Result};
