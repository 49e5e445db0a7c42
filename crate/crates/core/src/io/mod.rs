//! File formats, configuration and synthetic data.

pub mod config;
pub mod dataset;
pub mod idx;
pub mod runlog;
pub mod synth;
pub mod tensor;
