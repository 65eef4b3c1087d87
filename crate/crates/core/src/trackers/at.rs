use crate::dsp::FilterChain;
use crate::error::Result;

use super::{Algorithm, OpCount, PhaseTracker, Refractory, TrackerConfig, TrackerStep, TriggerEvent};

/// Band of the causal isolation filter in front of the threshold.
pub const AT_BAND_HZ: (f64, f64) = (0.5, 2.0);

/// Amplitude threshold: no phase estimate, triggers on upward crossings of
/// a first-order band-passed signal.
#[derive(Clone, Debug)]
pub struct AtTracker {
    band: FilterChain,
    threshold: f64,
    refractory: Refractory,
    prev: Option<f64>,
    index: u64,
    fs: f64,
}

impl AtTracker {
    pub fn new(cfg: &TrackerConfig, fs: f64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            band: FilterChain::first_order_bandpass(fs, AT_BAND_HZ.0, AT_BAND_HZ.1)?,
            threshold: cfg.at_threshold,
            refractory: Refractory::new(cfg.refractory, fs),
            prev: None,
            index: 0,
            fs,
        })
    }

    /// Isolation-filtered value of `sample` without thresholding.
    #[inline]
    pub fn filter(&mut self, sample: f64) -> f64 {
        self.band.process(sample)
    }

    /// One preprocessed sample in, optional trigger out.
    #[inline]
    pub fn step_at(&mut self, sample: f64) -> Option<TriggerEvent> {
        let n = self.index;
        self.index += 1;
        let y = self.band.process(sample);
        let crossed = matches!(self.prev, Some(p) if p < self.threshold && y >= self.threshold);
        self.prev = Some(y);
        (crossed && self.refractory.try_fire(n)).then(|| TriggerEvent {
            sample_index: n,
            time_s: n as f64 / self.fs,
            algorithm: Algorithm::At,
            tracker_phase_deg: None,
            amplitude_uv: sample,
        })
    }

    /// Threshold crossing on an already-filtered value; used to check the
    /// trigger rule in isolation.
    pub fn step_filtered(&mut self, filtered: f64) -> Option<u64> {
        let n = self.index;
        self.index += 1;
        let crossed = matches!(self.prev, Some(p) if p < self.threshold && filtered >= self.threshold);
        self.prev = Some(filtered);
        (crossed && self.refractory.try_fire(n)).then_some(n)
    }
}

impl PhaseTracker for AtTracker {
    fn algorithm(&self) -> Algorithm {
        Algorithm::At
    }

    fn step(&mut self, sample: f64) -> TrackerStep {
        TrackerStep {
            phase_deg: None,
            freq_hz: None,
            trigger: self.step_at(sample),
        }
    }

    fn reset(&mut self) {
        self.band.reset();
        self.refractory.reset();
        self.prev = None;
        self.index = 0;
    }

    fn op_count(&self) -> OpCount {
        // two first-order sections (3 mul, 3 add each), two compares
        OpCount {
            add: 6,
            mul: 6,
            div: 0,
            cmp: 3,
            transcendental: 0,
        }
    }
}
