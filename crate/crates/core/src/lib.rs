pub mod diagnostics;
pub mod error;
pub mod io;
pub mod model;
pub mod report;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
