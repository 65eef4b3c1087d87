pub mod angle;
pub mod bench;
pub mod cli;
pub mod dsp;
pub mod error;
pub mod evaluation;
pub mod gate;
pub mod io;
pub mod metrics;
pub mod optimizer;
pub mod oracle;
pub mod pipeline;
pub mod recording;
pub mod synth;
pub mod trackers;

pub use error::{Error, Result};
