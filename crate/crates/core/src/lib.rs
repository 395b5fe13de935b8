pub mod benchmark;
pub mod dbht;
pub mod error;
pub mod memory;
pub mod panel_io;
pub mod pipeline;
pub mod regression;
pub mod rolling;
pub mod stats;
pub mod synth;
pub mod weights;

pub use error::{Error, Result};
