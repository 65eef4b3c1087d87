//! Causal sample-by-sample filtering and windowed band power.

mod iir;
mod spectrum;

pub use iir::{FilterChain, IirSection, PreprocessConfig, Preprocessor, MIN_SAMPLING_RATE};
pub use spectrum::{band_power, Band, BandPower, BandPowerEstimator, MIN_WINDOW_S};

/// Sampled single-channel signal in microvolts.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleStream {
    pub samples: Vec<f64>,
    pub fs: f64,
}

impl SampleStream {
    pub fn new(samples: Vec<f64>, fs: f64) -> crate::Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(crate::error::invalid("fs", format!("{fs} must be positive")));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(crate::Error::StreamIntegrity { index: i as u64 });
        }
        Ok(Self { samples, fs })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}
