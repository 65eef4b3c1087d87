//! Evaluation quantities: circular statistics, CMAE45, the PAS family,
//! slow-wave characterization, targeting capacity and trigger intervals.

use crate::angle::{atan2_deg, diff_deg, sincos_deg, wrap_deg};
use crate::error::{Error, Result};

/// Stimulations per 2 s window at the 4 Hz cap.
pub const MAX_STIM: usize = 8;
pub const PAS_WINDOW_S: f64 = 2.0;
/// Below this resultant length the circular mean is undefined.
pub const UNDEFINED_RESULTANT: f64 = 1e-9;
pub const TARGET_PHASE_DEG: f64 = 45.0;
pub const HISTOGRAM_BINS: usize = 36;
pub const INTERVAL_BIN_S: f64 = 0.05;
pub const INTERVAL_RANGE_S: (f64, f64) = (0.25, 3.0);

/// Up-phase class: `(0°, 90°]`.
#[inline]
pub fn in_up_phase(phase_deg: f64) -> bool {
    phase_deg > 0.0 && phase_deg <= 90.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircularSummary {
    pub mean_deg: f64,
    pub sd_deg: f64,
    pub resultant: f64,
    pub n: usize,
}

/// First trigonometric moment from pooled unit-vector sums.
pub fn circular_from_sums(sum_cos: f64, sum_sin: f64, n: usize) -> Result<CircularSummary> {
    if n == 0 {
        return Err(Error::InsufficientData("no phases".into()));
    }
    let (c, s) = (sum_cos / n as f64, sum_sin / n as f64);
    let r = c.hypot(s);
    if r < UNDEFINED_RESULTANT {
        return Err(Error::UndefinedMean { resultant: r });
    }
    Ok(CircularSummary {
        mean_deg: atan2_deg(s, c),
        sd_deg: (-2.0 * r.min(1.0).ln()).sqrt().to_degrees(),
        resultant: r,
        n,
    })
}

pub fn circular_mean_sd(phases_deg: &[f64]) -> Result<CircularSummary> {
    let (c, s) = unit_sums(phases_deg);
    circular_from_sums(c, s, phases_deg.len())
}

pub fn unit_sums(phases_deg: &[f64]) -> (f64, f64) {
    phases_deg.iter().fold((0.0, 0.0), |(c, s), p| {
        let (sn, cs) = sincos_deg(*p);
        (c + cs, s + sn)
    })
}

/// Circular distance of a mean to 45°: (normalized to `[0, 1]`, degrees).
pub fn cmae45_of_mean(mean_deg: f64) -> (f64, f64) {
    let d = diff_deg(mean_deg, TARGET_PHASE_DEG).abs();
    (d / 180.0, d)
}

pub fn cmae45(phases_deg: &[f64]) -> Result<(f64, f64)> {
    Ok(cmae45_of_mean(circular_mean_sd(phases_deg)?.mean_deg))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PasReport {
    pub pas_all: f64,
    pub pas_in_up: f64,
    pub pas_not_up: f64,
    pub windows: usize,
    pub n_all: usize,
    pub n_in_up: usize,
    pub n_not_up: usize,
}

/// PAS from trigger counts over `windows` qualifying 2 s windows.
pub fn pas_from_counts(n_all: usize, n_in_up: usize, windows: usize) -> Result<PasReport> {
    if windows == 0 {
        return Err(Error::InsufficientData("no qualifying windows".into()));
    }
    let denom = (windows * MAX_STIM) as f64;
    let n_not_up = n_all - n_in_up;
    let pas_in_up = 100.0 * n_in_up as f64 / denom;
    let pas_not_up = 100.0 * n_not_up as f64 / denom;
    Ok(PasReport {
        pas_all: pas_in_up + pas_not_up,
        pas_in_up,
        pas_not_up,
        windows,
        n_all,
        n_in_up,
        n_not_up,
    })
}

/// PAS of trigger phases already restricted to qualifying windows.
pub fn pas(phases_deg: &[f64], windows: usize) -> Result<PasReport> {
    let up = phases_deg.iter().filter(|&&p| in_up_phase(p)).count();
    pas_from_counts(phases_deg.len(), up, windows)
}

/// Non-overlapping 2 s windows whose samples are all qualifying; returns
/// a per-sample mask of those windows and their count.
pub fn qualifying_windows(mask: &[bool], fs: f64) -> (Vec<bool>, usize) {
    let w = (PAS_WINDOW_S * fs).round() as usize;
    let mut out = vec![false; mask.len()];
    let mut count = 0;
    for (chunk, dst) in mask.chunks_exact(w).zip(out.chunks_exact_mut(w)) {
        if chunk.iter().all(|&b| b) {
            dst.fill(true);
            count += 1;
        }
    }
    (out, count)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AmplitudeClass {
    Sub20,
    Low,
    High,
}

impl AmplitudeClass {
    pub fn of(pp_uv: f64) -> Self {
        if pp_uv < 20.0 {
            AmplitudeClass::Sub20
        } else if pp_uv <= 60.0 {
            AmplitudeClass::Low
        } else {
            AmplitudeClass::High
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlowWave {
    /// First minimum.
    pub start: usize,
    /// Next minimum (exclusive end).
    pub end: usize,
    pub freq_hz: f64,
    pub amplitude_uv: f64,
    pub class: AmplitudeClass,
}

const FLAT_RUN_S: f64 = 0.05;

/// Local minima: strict three-point minima, plus flat-bottomed minima up to
/// 50 ms wide located at their earliest sample.
pub fn local_minima(xs: &[f64], fs: f64) -> Vec<usize> {
    let max_flat = (FLAT_RUN_S * fs).round().max(1.0) as usize;
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < xs.len() {
        if xs[i] < xs[i - 1] {
            let mut j = i;
            while j + 1 < xs.len() && xs[j + 1] == xs[i] {
                j += 1;
            }
            if j + 1 < xs.len() && xs[j + 1] > xs[i] && j - i < max_flat {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Waves between consecutive minima of a 0.5-4 Hz signal whose whole span
/// lies inside `mask`. Minima pairs outside 0.5-4 Hz are skipped.
pub fn detect_waves(filtered: &[f64], fs: f64, mask: &[bool]) -> Vec<SlowWave> {
    let n = filtered.len().min(mask.len());
    let mut outside = vec![0u32; n + 1];
    for i in 0..n {
        outside[i + 1] = outside[i] + u32::from(!mask[i]);
    }
    let minima = local_minima(&filtered[..n], fs);
    minima
        .windows(2)
        .filter_map(|p| {
            let (a, b) = (p[0], p[1]);
            if outside[b + 1] - outside[a] != 0 {
                return None;
            }
            let freq = fs / (b - a) as f64;
            if !(0.5..=4.0).contains(&freq) {
                return None;
            }
            let peak = filtered[a..b].iter().copied().fold(f64::MIN, f64::max);
            let amp = peak - filtered[a];
            Some(SlowWave {
                start: a,
                end: b,
                freq_hz: freq,
                amplitude_uv: amp,
                class: AmplitudeClass::of(amp),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TargetingCapacity {
    /// Percent of 20-60 µV waves holding at least one trigger.
    pub low_pct: f64,
    pub high_pct: f64,
    pub low_waves: usize,
    pub high_waves: usize,
    pub low_hits: usize,
    pub high_hits: usize,
    /// Percent of phased triggers in the up-phase; NaN with no triggers.
    pub up_pct: f64,
}

/// `triggers` must be sorted ascending.
pub fn targeting_capacity(waves: &[SlowWave], triggers: &[u64], phases_deg: &[f64]) -> TargetingCapacity {
    let mut hits = [0usize; 2];
    let mut totals = [0usize; 2];
    for w in waves {
        let slot = match w.class {
            AmplitudeClass::Sub20 => continue,
            AmplitudeClass::Low => 0,
            AmplitudeClass::High => 1,
        };
        totals[slot] += 1;
        let first = triggers.partition_point(|&t| (t as usize) < w.start);
        if triggers.get(first).is_some_and(|&t| (t as usize) < w.end) {
            hits[slot] += 1;
        }
    }
    let pct = |h: usize, t: usize| if t == 0 { 0.0 } else { 100.0 * h as f64 / t as f64 };
    let up = phases_deg.iter().filter(|&&p| in_up_phase(p)).count();
    TargetingCapacity {
        low_pct: pct(hits[0], totals[0]),
        high_pct: pct(hits[1], totals[1]),
        low_waves: totals[0],
        high_waves: totals[1],
        low_hits: hits[0],
        high_hits: hits[1],
        up_pct: if phases_deg.is_empty() {
            f64::NAN
        } else {
            100.0 * up as f64 / phases_deg.len() as f64
        },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalStats {
    pub median_s: f64,
    pub sd_s: f64,
    pub n: usize,
    /// 0.05 s bins over `[0.25, 3)` s.
    pub histogram: Vec<usize>,
    pub below: usize,
    pub above: usize,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Successive-difference statistics; `None` for fewer than two triggers.
pub fn trigger_intervals(times_s: &[f64]) -> Option<IntervalStats> {
    if times_s.len() < 2 {
        return None;
    }
    let mut d: Vec<f64> = times_s.windows(2).map(|w| w[1] - w[0]).collect();
    let n = d.len();
    let mean = d.iter().sum::<f64>() / n as f64;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let (lo, hi) = INTERVAL_RANGE_S;
    let bins = ((hi - lo) / INTERVAL_BIN_S).round() as usize;
    let mut histogram = vec![0; bins];
    let (mut below, mut above) = (0, 0);
    for &x in &d {
        let k = ((x - lo) / INTERVAL_BIN_S + 1e-9).floor();
        if k < 0.0 {
            below += 1;
        } else if k as usize >= bins {
            above += 1;
        } else {
            histogram[k as usize] += 1;
        }
    }
    Some(IntervalStats {
        median_s: median(&mut d),
        sd_s: sd,
        n,
        histogram,
        below,
        above,
    })
}

/// Counts per 10° bin.
pub fn circular_histogram(phases_deg: &[f64]) -> [usize; HISTOGRAM_BINS] {
    let mut h = [0; HISTOGRAM_BINS];
    let width = 360.0 / HISTOGRAM_BINS as f64;
    for &p in phases_deg {
        let k = (wrap_deg(p) / width).floor() as usize;
        h[k.min(HISTOGRAM_BINS - 1)] += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn circular_examples() {
        let s = circular_mean_sd(&[30.0, 60.0]).unwrap();
        assert!((s.mean_deg - 45.0).abs() < 1e-9);
        let s = circular_mean_sd(&[350.0, 10.0]).unwrap();
        assert!(diff_deg(s.mean_deg, 0.0).abs() < 1e-9);
        assert!(matches!(
            circular_mean_sd(&[0.0, 180.0]),
            Err(Error::UndefinedMean { .. })
        ));
        let s = circular_mean_sd(&[10.0; 5]).unwrap();
        assert!(s.sd_deg.abs() < 1e-6);
    }

    #[test]
    fn cmae_examples() {
        assert_eq!(cmae45(&[45.0, 45.0]).unwrap(), (0.0, 0.0));
        assert_eq!(cmae45_of_mean(225.0), (1.0, 180.0));
        let (n, d) = cmae45(&[40.0, 50.0]).unwrap();
        assert!(n.abs() < 1e-12 && d.abs() < 1e-9);
        assert!((cmae45_of_mean(359.0).1 - 46.0).abs() < 1e-9);
    }

    #[test]
    fn pas_examples() {
        let r = pas(&[45.0; 12], 10).unwrap();
        assert!((r.pas_in_up - 15.0).abs() < 1e-12);
        let r = pas(&[], 10).unwrap();
        assert_eq!((r.pas_all, r.pas_in_up, r.pas_not_up), (0.0, 0.0, 0.0));
        let r = pas(&[30.0; 80], 10).unwrap();
        assert_eq!(r.pas_in_up, 100.0);
        assert!(pas(&[30.0], 0).is_err());
    }

    #[test]
    fn up_phase_boundaries() {
        assert!(!in_up_phase(0.0));
        assert!(in_up_phase(0.001));
        assert!(in_up_phase(90.0));
        assert!(!in_up_phase(90.001));
    }

    fn sine(f: f64, pp: f64, secs: f64, fs: f64) -> Vec<f64> {
        (0..(secs * fs) as usize)
            .map(|n| -pp / 2.0 * (2.0 * PI * f * n as f64 / fs).cos())
            .collect()
    }

    #[test]
    fn waves_on_sinusoids() {
        let fs = 250.0;
        let x = sine(1.0, 60.0, 20.0, fs);
        let waves = detect_waves(&x, fs, &vec![true; x.len()]);
        assert_eq!(waves.len(), 18);
        for w in &waves {
            assert!((w.freq_hz - 1.0).abs() < 1e-9);
            assert!((w.amplitude_uv - 60.0).abs() < 1e-9);
            assert_eq!(w.class, AmplitudeClass::Low);
        }
        let x = sine(2.0, 80.0, 10.0, fs);
        let waves = detect_waves(&x, fs, &vec![true; x.len()]);
        assert!(waves
            .iter()
            .all(|w| (w.freq_hz - 2.0).abs() < 1e-9 && w.class == AmplitudeClass::High));
        assert!(detect_waves(&[3.0; 1000], fs, &[true; 1000]).is_empty());
    }

    #[test]
    fn waves_respect_mask() {
        let fs = 250.0;
        let x = sine(1.0, 60.0, 20.0, fs);
        let mut mask = vec![true; x.len()];
        mask[(10.5 * fs) as usize] = false;
        assert_eq!(detect_waves(&x, fs, &mask).len(), 17);
    }

    #[test]
    fn flat_bottom_tie_break() {
        let x = [5.0, 1.0, 1.0, 1.0, 4.0, 2.0, 6.0];
        assert_eq!(local_minima(&x, 250.0), vec![1, 5]);
        let mut long = vec![5.0];
        long.extend(std::iter::repeat_n(1.0, 30));
        long.push(5.0);
        assert!(local_minima(&long, 250.0).is_empty());
    }

    #[test]
    fn targeting_examples() {
        let wave = |start, class| SlowWave {
            start,
            end: start + 250,
            freq_hz: 1.0,
            amplitude_uv: 40.0,
            class,
        };
        let waves = [
            wave(0, AmplitudeClass::Low),
            wave(250, AmplitudeClass::Low),
            wave(500, AmplitudeClass::High),
        ];
        let t = targeting_capacity(&waves, &[10, 260], &[45.0, 120.0]);
        assert_eq!((t.low_pct, t.high_pct, t.up_pct), (100.0, 0.0, 50.0));
        let t = targeting_capacity(&waves, &[], &[]);
        assert_eq!((t.low_pct, t.high_pct), (0.0, 0.0));
        assert!(t.up_pct.is_nan());
        // end is exclusive
        let t = targeting_capacity(&waves[..1], &[250], &[]);
        assert_eq!(t.low_pct, 0.0);
    }

    #[test]
    fn interval_examples() {
        let s = trigger_intervals(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.median_s, s.sd_s, s.n), (1.0, 0.0, 3));
        assert_eq!(s.histogram[15], 3);
        assert!(trigger_intervals(&[1.0]).is_none());
        assert_eq!(s.histogram.len(), 55);
    }

    #[test]
    fn histogram_bins() {
        let h = circular_histogram(&[0.0, 9.99, 10.0, 359.9, -5.0]);
        assert_eq!(h[0], 2);
        assert_eq!(h[1], 1);
        assert_eq!(h[35], 2);
    }

    #[test]
    fn qualifying_windows_need_full_coverage() {
        let mut mask = vec![true; 2000];
        mask[600] = false;
        let (m, n) = qualifying_windows(&mask, 250.0);
        assert_eq!(n, 3);
        assert!(!m[500] && m[0] && m[1999]);
    }

    proptest! {
        #[test]
        fn pas_identity(phases in prop::collection::vec(0.0f64..360.0, 0..200), windows in 1usize..100) {
            let r = pas(&phases, windows).unwrap();
            prop_assert_eq!(r.pas_all, r.pas_in_up + r.pas_not_up);
        }

        #[test]
        fn rotation_equivariance(phases in prop::collection::vec(0.0f64..90.0, 1..50), delta in -720.0f64..720.0) {
            let a = circular_mean_sd(&phases).unwrap();
            let rotated: Vec<f64> = phases.iter().map(|p| p + delta).collect();
            let b = circular_mean_sd(&rotated).unwrap();
            prop_assert!(diff_deg(b.mean_deg, a.mean_deg + delta).abs() < 1e-9);
            prop_assert!((b.sd_deg - a.sd_deg).abs() < 1e-9);
        }

        #[test]
        fn cmae_range(mean in -1000.0f64..1000.0) {
            let (n, d) = cmae45_of_mean(mean);
            prop_assert!((0.0..=180.0).contains(&d));
            prop_assert_eq!(n, d / 180.0);
        }

        #[test]
        fn waves_do_not_overlap(xs in prop::collection::vec(-50.0f64..50.0, 10..2000)) {
            let waves = detect_waves(&xs, 250.0, &vec![true; xs.len()]);
            for w in waves.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
            for w in &waves {
                prop_assert_eq!(w.freq_hz, 250.0 / (w.end - w.start) as f64);
                prop_assert!(w.amplitude_uv >= 0.0);
            }
        }
    }
}
