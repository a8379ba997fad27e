pub mod arch_graph;
pub mod cli;
pub mod cosim;
pub mod design_space;
pub mod error;
pub mod predictor;
pub mod profile;
pub mod runtime;
pub mod search;

pub use error::{Error, Result};
