//! Offline ground-truth phase: zero-phase Chebyshev type II band-pass
//! followed by the analytic-signal (Hilbert) phase.
//!
//! Phase convention everywhere: 0° at the negative-to-positive zero
//! crossing, 90° at the positive peak.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::angle::rad_to_deg_wrapped;
use crate::dsp::{IirSection, SampleStream};
use crate::error::{invalid, Error, Result};

/// Seconds excluded at each end of a recording.
pub const CROP_S: f64 = 210.0;
/// Extra length beyond the two crops required to run the oracle.
pub const MIN_VALID_S: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub band: (f64, f64),
    /// Prototype order; the band-pass has twice as many poles.
    pub order: usize,
    pub stopband_db: f64,
    pub crop_s: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            band: (0.5, 4.0),
            order: 4,
            stopband_db: 40.0,
            crop_s: CROP_S,
        }
    }
}

/// Chebyshev type II band-pass as second-order sections.
///
/// The band edges are the single-pass -3 dB points; the equiripple
/// stopband sits outside them at `stopband_db` attenuation. Unity gain at
/// the geometric band centre.
pub fn cheby2_bandpass(fs: f64, band: (f64, f64), order: usize, stopband_db: f64) -> Result<Vec<IirSection>> {
    let (f1, f2) = band;
    if !(f1 > 0.0 && f2 > f1 && f2 < fs / 2.0) {
        return Err(invalid("band", format!("({f1}, {f2}) Hz invalid for fs {fs}")));
    }
    if order == 0 || order % 2 != 0 {
        return Err(invalid("order", "prototype order must be even and positive"));
    }
    if !(stopband_db > 3.0) {
        return Err(invalid("stopband_db", "must exceed 3 dB"));
    }
    let n = order as f64;
    let eps = 1.0 / (10f64.powf(stopband_db / 10.0) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / n;
    // -3 dB frequency of the prototype whose stopband edge is 1 rad/s
    let w3 = 1.0 / ((1.0 / eps).acosh() / n).cosh();

    let mut proto_zeros = Vec::with_capacity(order);
    let mut proto_poles = Vec::with_capacity(order);
    for k in 0..order {
        let m = -(n - 1.0) + 2.0 * k as f64;
        let ang = m * PI / (2.0 * n);
        proto_zeros.push(Complex64::new(0.0, 1.0 / ang.sin()));
        let e = -Complex64::from_polar(1.0, ang);
        let p = Complex64::new(mu.sinh() * e.re, mu.cosh() * e.im);
        proto_poles.push(1.0 / p);
    }
    // move the -3 dB point to 1 rad/s
    let scale = 1.0 / w3;
    let k2 = 2.0 * fs;
    let w1 = k2 * (PI * f1 / fs).tan();
    let w2 = k2 * (PI * f2 / fs).tan();
    let w0sq = w1 * w2;
    let bw = w2 - w1;
    let to_bandpass = |r: Complex64| -> [Complex64; 2] {
        let r = r * scale;
        let disc = (r * r * bw * bw - 4.0 * w0sq).sqrt();
        [(r * bw + disc) / 2.0, (r * bw - disc) / 2.0]
    };
    let bilinear = |s: Complex64| (k2 + s) / (k2 - s);

    let upper = |roots: Vec<Complex64>| -> Vec<Complex64> {
        roots
            .into_iter()
            .flat_map(to_bandpass)
            .map(bilinear)
            .filter(|z| z.im > 0.0)
            .collect()
    };
    let mut poles = upper(proto_poles);
    let mut zeros = upper(proto_zeros);
    if poles.len() != order || zeros.len() != order {
        return Err(Error::Config("band-pass design produced real roots".into()));
    }
    // pair the poles closest to the unit circle with their nearest zeros
    poles.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let mut sections = Vec::with_capacity(order);
    for p in poles {
        let (j, _) = zeros
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - p).norm().total_cmp(&(b.1 - p).norm()))
            .expect("zero available");
        let z = zeros.swap_remove(j);
        sections.push(IirSection::new(
            [1.0, -2.0 * z.re, z.norm_sqr()],
            [-2.0 * p.re, p.norm_sqr()],
        )?);
    }
    let fc = (w0sq.sqrt() / k2).atan() * fs / PI;
    let g: f64 = sections.iter().map(|s| s.response(fc, fs).norm()).product();
    let per = g.powf(-1.0 / sections.len() as f64);
    for s in &mut sections {
        for b in &mut s.b {
            *b *= per;
        }
    }
    Ok(sections)
}

fn run_sections(sections: &mut [IirSection], xs: &mut [f64]) {
    for s in sections.iter_mut() {
        s.reset();
        for x in xs.iter_mut() {
            *x = s.process(*x);
        }
    }
}

/// Forward-backward filtering with odd reflection padding; zero net phase.
pub fn filtfilt(sections: &[IirSection], xs: &[f64], padlen: usize) -> Vec<f64> {
    let n = xs.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = padlen.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * xs[0] - xs[i]));
    ext.extend_from_slice(xs);
    ext.extend((1..=pad).map(|i| 2.0 * xs[n - 1] - xs[n - 1 - i]));
    let mut secs = sections.to_vec();
    run_sections(&mut secs, &mut ext);
    ext.reverse();
    run_sections(&mut secs, &mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Zero-phase 0.5-4 Hz band-pass of a whole recording.
pub fn zero_phase_bandpass(signal: &SampleStream, cfg: &OracleConfig) -> Result<SampleStream> {
    let min = 2.0 * cfg.crop_s + MIN_VALID_S;
    if signal.duration_s() < min {
        return Err(Error::InsufficientData(format!(
            "recording of {:.1} s is shorter than {min} s",
            signal.duration_s()
        )));
    }
    Ok(SampleStream {
        samples: zero_phase_filter(&signal.samples, signal.fs, cfg)?,
        fs: signal.fs,
    })
}

/// The band-pass without the length check, for short test signals.
pub fn zero_phase_filter(xs: &[f64], fs: f64, cfg: &OracleConfig) -> Result<Vec<f64>> {
    let sections = cheby2_bandpass(fs, cfg.band, cfg.order, cfg.stopband_db)?;
    let padlen = (12.0 * fs) as usize;
    Ok(filtfilt(&sections, xs, padlen))
}

/// Analytic-signal phase in degrees under the 0°-at-upward-crossing convention.
pub fn analytic_phase(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = xs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    // one-sided spectrum doubling
    for (k, v) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *v *= h;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    // arg(z) is 0 at the positive peak; shift by +90° for the convention
    buf.iter()
        .map(|z| rad_to_deg_wrapped(z.im.atan2(z.re) + PI / 2.0))
        .collect()
}

/// Per-sample ground-truth phase with its valid region.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTrack {
    pub phase_deg: Vec<f64>,
    /// Half-open valid sample range `[start, end)`.
    pub valid: std::ops::Range<usize>,
    pub fs: f64,
}

impl PhaseTrack {
    pub fn is_valid(&self, index: usize) -> bool {
        self.valid.contains(&index)
    }

    pub fn valid_mask(&self) -> Vec<bool> {
        (0..self.phase_deg.len()).map(|i| self.is_valid(i)).collect()
    }
}

/// Hilbert phase of an already band-passed stream, cropped by `crop_s` on both sides.
pub fn hilbert_phase(filtered: &SampleStream, crop_s: f64) -> PhaseTrack {
    let n = filtered.len();
    let crop = (crop_s * filtered.fs).round() as usize;
    let valid = if n > 2 * crop { crop..n - crop } else { 0..0 };
    PhaseTrack {
        phase_deg: analytic_phase(&filtered.samples),
        valid,
        fs: filtered.fs,
    }
}

/// Band-passed signal and phase track of one recording.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub filtered: SampleStream,
    pub track: PhaseTrack,
}

pub fn ground_truth(signal: &SampleStream, cfg: &OracleConfig) -> Result<GroundTruth> {
    let filtered = zero_phase_bandpass(signal, cfg)?;
    let track = hilbert_phase(&filtered, cfg.crop_s);
    Ok(GroundTruth { filtered, track })
}

/// Ground-truth phase at each trigger sample; out-of-mask triggers are
/// dropped and counted.
pub fn phase_at_triggers<I>(track: &PhaseTrack, triggers: I) -> (Vec<f64>, usize)
where
    I: IntoIterator<Item = u64>,
{
    let mut dropped = 0;
    let mut out = Vec::new();
    for t in triggers {
        let i = t as usize;
        if track.is_valid(i) {
            out.push(track.phase_deg[i]);
        } else {
            dropped += 1;
        }
    }
    (out, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::diff_deg;

    const FS: f64 = 250.0;

    fn sine(f: f64, amp: f64, secs: f64) -> Vec<f64> {
        (0..(secs * FS) as usize)
            .map(|n| amp * (2.0 * PI * f * n as f64 / FS).sin())
            .collect()
    }

    #[test]
    fn design_is_stable_with_flat_passband() {
        let secs = cheby2_bandpass(FS, (0.5, 4.0), 4, 40.0).unwrap();
        assert_eq!(secs.len(), 4);
        assert!(secs.iter().all(IirSection::is_stable));
        let gain = |f: f64| secs.iter().map(|s| s.response(f, FS).norm()).product::<f64>();
        // single-pass -3 dB at the band edges
        assert!((20.0 * gain(0.5).log10() + 3.01).abs() < 0.05);
        assert!((20.0 * gain(4.0).log10() + 3.01).abs() < 0.05);
        assert!((gain(1.0) - 1.0).abs() < 1e-3);
        // stopband: at least 40 dB from 10 Hz upward
        for f in [10.0, 20.0, 50.0, 100.0] {
            assert!(20.0 * gain(f).log10() <= -40.0 + 1e-6, "{f}");
        }
    }

    #[test]
    fn one_hz_preserved_without_phase_shift() {
        let x = sine(1.0, 40.0, 120.0);
        let y = zero_phase_filter(&x, FS, &OracleConfig::default()).unwrap();
        let mid = &y[(30.0 * FS) as usize..(90.0 * FS) as usize];
        let peak = mid.iter().cloned().fold(f64::MIN, f64::max);
        assert!((peak / 40.0 - 1.0).abs() < 0.01, "{peak}");
        // cross-correlation lag in the steady-state region is zero
        let lag = best_lag(&x, &y, 30);
        assert_eq!(lag, 0);
    }

    fn best_lag(x: &[f64], y: &[f64], max: i64) -> i64 {
        let (a, b) = (x.len() / 4, 3 * x.len() / 4);
        (-max..=max)
            .max_by(|&l1, &l2| {
                let c = |l: i64| (a..b).map(|i| x[i] * y[(i as i64 + l) as usize]).sum::<f64>();
                c(l1).total_cmp(&c(l2))
            })
            .unwrap()
    }

    #[test]
    fn ten_hz_attenuated_twice_stopband() {
        let x = sine(10.0, 100.0, 60.0);
        let y = zero_phase_filter(&x, FS, &OracleConfig::default()).unwrap();
        let mid = &y[(20.0 * FS) as usize..(40.0 * FS) as usize];
        let peak = mid.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(20.0 * (peak / 100.0).log10() <= -80.0, "{peak}");
    }

    #[test]
    fn impulse_response_is_even() {
        let n = 40_001;
        let mut x = vec![0.0; n];
        x[n / 2] = 1.0;
        let y = zero_phase_filter(&x, FS, &OracleConfig::default()).unwrap();
        let peak = y[n / 2].abs();
        for k in 1..10_000 {
            assert!((y[n / 2 + k] - y[n / 2 - k]).abs() < 1e-9 * peak.max(1.0), "{k}");
        }
    }

    #[test]
    fn hilbert_convention_on_sine() {
        let x = sine(1.0, 1.0, 40.0);
        let ph = analytic_phase(&x);
        let inner = (5.0 * FS) as usize..(35.0 * FS) as usize;
        for i in inner.clone() {
            let expect = 360.0 * i as f64 / FS;
            assert!(diff_deg(ph[i], expect).abs() < 0.1, "{i}");
        }
        // negated sine reads 180° further on
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let ph = analytic_phase(&neg);
        for i in inner {
            let expect = 360.0 * i as f64 / FS + 180.0;
            assert!(diff_deg(ph[i], expect).abs() < 0.1, "{i}");
        }
    }

    #[test]
    fn short_recordings_refused() {
        let s = SampleStream::new(vec![0.0; (400.0 * FS) as usize], FS).unwrap();
        assert!(matches!(
            zero_phase_bandpass(&s, &OracleConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn trigger_phases_and_mask() {
        let x = sine(1.0, 1.0, 500.0);
        let track = hilbert_phase(&SampleStream::new(x, FS).unwrap(), CROP_S);
        let peak = (250.2 * FS) as u64;
        let zero = (251.0 * FS) as u64;
        let (ph, dropped) = phase_at_triggers(&track, [peak, zero, 10, (499.0 * FS) as u64]);
        assert_eq!(dropped, 2);
        assert!(diff_deg(ph[0], 72.0).abs() < 0.1);
        assert!(diff_deg(ph[1], 0.0).abs() < 0.1);
        assert!(phase_at_triggers(&track, []).0.is_empty());
    }

    #[test]
    fn self_consistency_on_in_band_chirp() {
        // slowly varying 0.8-1.8 Hz phase; reconstruct, re-run oracle, compare
        let n = (200.0 * FS) as usize;
        let mut psi = 0.0;
        let mut phase = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 / FS;
            let f = 1.3 + 0.5 * (2.0 * PI * t / 50.0).sin();
            psi += 2.0 * PI * f / FS;
            phase.push(rad_to_deg_wrapped(psi));
        }
        let x: Vec<f64> = phase.iter().map(|p| p.to_radians().sin()).collect();
        let y = zero_phase_filter(&x, FS, &OracleConfig::default()).unwrap();
        let track = analytic_phase(&y);
        let inner = (30.0 * FS) as usize..n - (30.0 * FS) as usize;
        let rms =
            (inner.clone().map(|i| diff_deg(track[i], phase[i]).powi(2)).sum::<f64>() / inner.len() as f64).sqrt();
        assert!(rms < 1.0, "{rms}");
    }
}
