use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// Frequency band in Hz, `low < high`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

impl Band {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    fn validate(&self, fs: f64) -> Result<()> {
        if !(self.low > 0.0 && self.low < self.high && self.high < fs / 2.0) {
            return Err(invalid(
                "band",
                format!(
                    "({}, {}) Hz must satisfy 0 < low < high < {}",
                    self.low,
                    self.high,
                    fs / 2.0
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandPower {
    pub band: Band,
    /// Microvolts squared.
    pub power: f64,
    pub window_s: f64,
}

pub const MIN_WINDOW_S: f64 = 2.0;

/// Hann-tapered single-transform power estimator for a fixed window length.
///
/// The one-sided spectrum is scaled so that summing every bin gives the
/// taper-weighted mean square of the window.
pub struct BandPowerEstimator {
    fs: f64,
    taper: Vec<f64>,
    taper_energy: f64,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    spectrum: Vec<f64>,
}

impl BandPowerEstimator {
    pub fn new(fs: f64, len: usize) -> Result<Self> {
        if !(fs > 0.0) {
            return Err(invalid("fs", "must be positive"));
        }
        if (len as f64) < MIN_WINDOW_S * fs {
            return Err(invalid(
                "window",
                format!("{len} samples is shorter than {MIN_WINDOW_S} s"),
            ));
        }
        // periodic Hann
        let taper: Vec<f64> = (0..len)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
            .collect();
        let taper_energy = taper.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(len);
        Ok(Self {
            fs,
            taper,
            taper_energy,
            fft,
            buf: vec![Complex64::new(0.0, 0.0); len],
            spectrum: vec![0.0; len / 2 + 1],
        })
    }

    pub fn len(&self) -> usize {
        self.taper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taper.is_empty()
    }

    /// Transforms `window` and keeps its one-sided power spectrum for
    /// subsequent [`Self::band`] queries.
    pub fn load<I: IntoIterator<Item = f64>>(&mut self, window: I) {
        let n = self.taper.len();
        let mut count = 0;
        for (slot, (x, w)) in self.buf.iter_mut().zip(window.into_iter().zip(&self.taper)) {
            *slot = Complex64::new(x * w, 0.0);
            count += 1;
        }
        debug_assert_eq!(count, n);
        self.fft.process(&mut self.buf);
        let scale = 1.0 / (n as f64 * self.taper_energy);
        for (k, p) in self.spectrum.iter_mut().enumerate() {
            let edge = k == 0 || (n.is_multiple_of(2) && k == n / 2);
            let c = if edge { 1.0 } else { 2.0 };
            *p = c * self.buf[k].norm_sqr() * scale;
        }
    }

    /// Bin-sum of the loaded spectrum over `band` (bins with centre in `[low, high]`).
    pub fn band(&self, band: Band) -> Result<BandPower> {
        band.validate(self.fs)?;
        let df = self.fs / self.taper.len() as f64;
        let lo = (band.low / df).ceil() as usize;
        let hi = ((band.high / df).floor() as usize).min(self.spectrum.len() - 1);
        let power = if lo <= hi {
            self.spectrum[lo..=hi].iter().sum()
        } else {
            0.0
        };
        Ok(BandPower {
            band,
            power,
            window_s: self.taper.len() as f64 / self.fs,
        })
    }

    pub fn total(&self) -> f64 {
        self.spectrum.iter().sum()
    }
}

/// One-shot band power of a window.
pub fn band_power(window: &[f64], fs: f64, band: Band) -> Result<BandPower> {
    band.validate(fs)?;
    let mut est = BandPowerEstimator::new(fs, window.len())?;
    est.load(window.iter().copied());
    est.band(band)
}
