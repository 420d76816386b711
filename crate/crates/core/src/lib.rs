pub mod boundary;
pub mod config;
pub mod control;
pub mod error;
pub mod fem;
pub mod functions;
pub mod geometry;
pub mod mesh;
pub mod solvers;
pub mod sparse;
pub mod study;

pub use error::{Error, Result};
