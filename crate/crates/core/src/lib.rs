pub mod cli;
pub mod convnet;
pub mod cost;
pub mod encoding;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod snn;

pub use error::{Error, Result};
