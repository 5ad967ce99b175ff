//! Exact solver for the LP relaxation of the subset assignment problem.

pub mod costmodel;
pub mod engine;
pub mod error;
pub mod gen;
pub mod io;
pub mod model;
pub mod moveindex;
pub mod numerics;
pub mod oracle;
pub mod profiles;

pub use error::{Error, Violation};
