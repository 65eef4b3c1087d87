use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Second-order IIR section in transposed direct form II, `a0` normalized to 1.
///
/// First-order sections are stored with `b2 = a2 = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IirSection {
    pub b: [f64; 3],
    pub a: [f64; 2],
    z: [f64; 2],
}

impl IirSection {
    /// Builds a section from feedforward `b` and feedback `[a1, a2]`, rejecting
    /// unstable feedback polynomials.
    pub fn new(b: [f64; 3], a: [f64; 2]) -> Result<Self> {
        let s = Self { b, a, z: [0.0; 2] };
        if !s.is_stable() {
            return Err(invalid(
                "feedback",
                format!(
                    "poles of 1 + {:.6} z^-1 + {:.6} z^-2 not inside unit circle",
                    a[0], a[1]
                ),
            ));
        }
        Ok(s)
    }

    /// Second-order notch via the bilinear transform with prewarping.
    pub fn notch(fs: f64, f0: f64, q: f64) -> Result<Self> {
        check_freq(fs, f0)?;
        if q <= 0.0 {
            return Err(invalid("q", "must be positive"));
        }
        let w0 = 2.0 * PI * f0 / fs;
        let alpha = w0.sin() / (2.0 * q);
        let cw = w0.cos();
        let a0 = 1.0 + alpha;
        Self::new(
            [1.0 / a0, -2.0 * cw / a0, 1.0 / a0],
            [-2.0 * cw / a0, (1.0 - alpha) / a0],
        )
    }

    /// First-order high-pass `s / (s + wc)` under the bilinear transform.
    pub fn highpass1(fs: f64, fc: f64) -> Result<Self> {
        check_freq(fs, fc)?;
        let k = 2.0 * fs;
        let wc = k * (PI * fc / fs).tan();
        let g = k / (k + wc);
        Self::new([g, -g, 0.0], [(wc - k) / (wc + k), 0.0])
    }

    /// First-order low-pass `wc / (s + wc)` under the bilinear transform.
    pub fn lowpass1(fs: f64, fc: f64) -> Result<Self> {
        check_freq(fs, fc)?;
        let k = 2.0 * fs;
        let wc = k * (PI * fc / fs).tan();
        let g = wc / (k + wc);
        Self::new([g, g, 0.0], [(wc - k) / (wc + k), 0.0])
    }

    pub fn is_stable(&self) -> bool {
        let [a1, a2] = self.a;
        a2.abs() < 1.0 && a1.abs() < 1.0 + a2
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    pub fn reset(&mut self) {
        self.z = [0.0; 2];
    }

    /// Complex response at `f` Hz.
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = Complex64::new(1.0, 0.0) + z1 * self.a[0] + z2 * self.a[1];
        num / den
    }
}

fn check_freq(fs: f64, f: f64) -> Result<()> {
    if !(fs > 0.0) || !fs.is_finite() {
        return Err(invalid("fs", format!("{fs} is not a positive sampling rate")));
    }
    if !(f > 0.0 && f < fs / 2.0) {
        return Err(invalid("frequency", format!("{f} Hz outside (0, {})", fs / 2.0)));
    }
    Ok(())
}

/// Cascade of sections applied in order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FilterChain {
    sections: Vec<IirSection>,
}

impl FilterChain {
    pub fn new(sections: Vec<IirSection>) -> Self {
        Self { sections }
    }

    pub fn sections(&self) -> &[IirSection] {
        &self.sections
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        self.sections.iter_mut().fold(x, |acc, s| s.process(acc))
    }

    pub fn reset(&mut self) {
        self.sections.iter_mut().for_each(IirSection::reset);
    }

    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(f, fs))
    }

    /// Causal band-pass made of one first-order high-pass and one first-order low-pass.
    pub fn first_order_bandpass(fs: f64, low: f64, high: f64) -> Result<Self> {
        if !(low < high) {
            return Err(invalid("band", format!("low {low} must be below high {high}")));
        }
        Ok(Self::new(vec![
            IirSection::highpass1(fs, low)?,
            IirSection::lowpass1(fs, high)?,
        ]))
    }
}

/// Cut-off settings of the shared preprocessing chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub notch_hz: f64,
    pub notch_q: f64,
    pub highpass_hz: f64,
    pub lowpass_hz: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            notch_hz: 50.0,
            notch_q: 30.0,
            highpass_hz: 0.1,
            lowpass_hz: 30.0,
        }
    }
}

pub const MIN_SAMPLING_RATE: f64 = 100.0;

/// Notch, first-order high-pass, first-order low-pass; one output per input.
#[derive(Clone, Debug)]
pub struct Preprocessor {
    chain: FilterChain,
    index: u64,
}

impl Preprocessor {
    pub fn new(fs: f64, cfg: &PreprocessConfig) -> Result<Self> {
        if !(fs >= MIN_SAMPLING_RATE) {
            return Err(Error::Config(format!(
                "sampling rate {fs} Hz below the supported minimum of {MIN_SAMPLING_RATE} Hz"
            )));
        }
        let mut sections = Vec::with_capacity(3);
        // at fs = 100 Hz the line frequency sits on Nyquist and is left alone
        if cfg.notch_hz < fs / 2.0 {
            sections.push(IirSection::notch(fs, cfg.notch_hz, cfg.notch_q)?);
        }
        sections.push(IirSection::highpass1(fs, cfg.highpass_hz)?);
        sections.push(IirSection::lowpass1(fs, cfg.lowpass_hz)?);
        Ok(Self {
            chain: FilterChain::new(sections),
            index: 0,
        })
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::StreamIntegrity { index: self.index });
        }
        self.index += 1;
        Ok(self.chain.process(x))
    }

    pub fn chain(&self) -> &FilterChain {
        &self.chain
    }

    pub fn reset(&mut self) {
        self.chain.reset();
        self.index = 0;
    }

    /// Convenience for whole buffers.
    pub fn run(&mut self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.step(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 250.0;

    /// Least-squares fit of `a sin(wt) + b cos(wt)` returning (gain, phase) vs. a unit sine.
    fn fit_sine(y: &[f64], f: f64, start: usize) -> (f64, f64) {
        let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (n, &v) in y.iter().enumerate().skip(start) {
            let t = n as f64 / FS;
            let (s, c) = (2.0 * PI * f * t).sin_cos();
            ss += s * s;
            sc += s * c;
            cc += c * c;
            ys += v * s;
            yc += v * c;
        }
        let det = ss * cc - sc * sc;
        let a = (ys * cc - yc * sc) / det;
        let b = (yc * ss - ys * sc) / det;
        (a.hypot(b), b.atan2(a).to_degrees())
    }

    fn drive(pre: &mut Preprocessor, f: f64, amp: f64, secs: f64) -> Vec<f64> {
        (0..(secs * FS) as usize)
            .map(|n| pre.step(amp * (2.0 * PI * f * n as f64 / FS).sin()).unwrap())
            .collect()
    }

    #[test]
    fn dc_decays_with_highpass_time_constant() {
        let mut pre = Preprocessor::new(FS, &PreprocessConfig::default()).unwrap();
        let tau = 1.0 / (2.0 * PI * 0.1);
        let y: Vec<f64> = (0..(10.0 * tau * FS) as usize)
            .map(|_| pre.step(100.0).unwrap())
            .collect();
        let at_tau = y[(tau * FS) as usize];
        assert!((at_tau - 100.0 / std::f64::consts::E).abs() < 2.0, "{at_tau}");
        assert!(y.last().unwrap().abs() < 0.01);
    }

    #[test]
    fn line_noise_attenuated() {
        let mut pre = Preprocessor::new(FS, &PreprocessConfig::default()).unwrap();
        let y = drive(&mut pre, 50.0, 50.0, 20.0);
        let (g, _) = fit_sine(&y, 50.0, (10.0 * FS) as usize);
        let db = 20.0 * (g / 50.0).log10();
        assert!(db <= -20.0, "{db} dB");
    }

    #[test]
    fn one_hz_gain_and_phase_match_analog_chain() {
        // analog oracle: first-order HP at 0.1 Hz, first-order LP at 30 Hz, notch at 50 Hz / Q 30
        let f = 1.0;
        let hp = (0.1f64 / f).atan().to_degrees();
        let lp = -(f / 30.0f64).atan().to_degrees();
        let (w, w0) = (f, 50.0);
        let notch = -((w * w0 / 30.0) / (w0 * w0 - w * w)).atan().to_degrees();
        let gain = (1.0 / (1.0 + (0.1f64 / f).powi(2)).sqrt()) * (1.0 / (1.0 + (f / 30.0f64).powi(2)).sqrt());

        let mut pre = Preprocessor::new(FS, &PreprocessConfig::default()).unwrap();
        let y = drive(&mut pre, f, 1.0, 60.0);
        let (g, ph) = fit_sine(&y, f, (30.0 * FS) as usize);
        assert!((20.0 * g.log10()).abs() < 1.0);
        assert!((g - gain).abs() < 1e-3, "{g} vs {gain}");
        assert!((ph - (hp + lp + notch)).abs() < 0.1, "{ph} vs {}", hp + lp + notch);

        // the high-pass stage alone leads by about 5.7 degrees
        let hp_only = IirSection::highpass1(FS, 0.1).unwrap().response(f, FS);
        assert!((hp_only.arg().to_degrees() - 5.71).abs() < 0.05);
    }

    #[test]
    fn non_finite_rejected() {
        let mut pre = Preprocessor::new(FS, &PreprocessConfig::default()).unwrap();
        pre.step(1.0).unwrap();
        match pre.step(f64::NAN) {
            Err(Error::StreamIntegrity { index }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn low_sampling_rate_refused() {
        assert!(Preprocessor::new(80.0, &PreprocessConfig::default()).is_err());
        assert!(Preprocessor::new(100.0, &PreprocessConfig::default()).is_ok());
    }

    #[test]
    fn unstable_section_refused() {
        assert!(IirSection::new([1.0, 0.0, 0.0], [0.0, 1.5]).is_err());
        assert!(IirSection::new([1.0, 0.0, 0.0], [-2.1, 0.99]).is_err());
    }
}
