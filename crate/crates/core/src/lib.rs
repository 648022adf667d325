pub mod error;
pub mod experiment;
pub mod distance;
pub mod fixtures;
pub mod fuzzer;
pub mod geom;
pub mod invariants;
pub mod scenario;
pub mod stats;
pub mod subjects;

pub use error::{Error, Result};
