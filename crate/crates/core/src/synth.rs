//! Parametric synthetic sleep EEG with a known slow-wave phase.
//!
//! NREM epochs carry a single slow-wave oscillator whose instantaneous
//! frequency follows a bounded random walk (an Ornstein-Uhlenbeck process
//! on log-frequency, reflected at the band edges) and whose peak-to-peak
//! amplitude is redrawn once per wave. Amplitude changes happen only on the
//! falling half of each wave, so every wave's first-minimum-to-maximum
//! excursion equals its drawn amplitude and the oscillator phase stays
//! exact. Pink background noise is present everywhere, sleep spindles in
//! N2, alpha and beta activity outside NREM.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::oracle::CROP_S;
use crate::recording::{EegRecording, Hypnogram, Stage, EPOCH_S};

/// Minimum length so the oracle's valid region is at least 300 s.
pub const MIN_DURATION_S: f64 = 2.0 * CROP_S + 300.0;

/// Seconds of raised-cosine fade at NREM run boundaries.
const STAGE_RAMP_S: f64 = 1.0;

/// Shape of the per-wave amplitude draw within `sw_pp_range`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmplitudeDist {
    Uniform,
    LogUniform,
}

impl AmplitudeDist {
    pub fn as_str(self) -> &'static str {
        match self {
            AmplitudeDist::Uniform => "uniform",
            AmplitudeDist::LogUniform => "log-uniform",
        }
    }

    fn draw(self, lo: f64, hi: f64, u: f64) -> f64 {
        match self {
            AmplitudeDist::Uniform => lo + u * (hi - lo),
            AmplitudeDist::LogUniform => (lo.ln() + u * (hi / lo).ln()).exp(),
        }
    }

    fn cdf(self, lo: f64, hi: f64, x: f64) -> f64 {
        let x = x.clamp(lo, hi);
        match self {
            AmplitudeDist::Uniform => (x - lo) / (hi - lo),
            AmplitudeDist::LogUniform => (x / lo).ln() / (hi / lo).ln(),
        }
    }
}

impl std::str::FromStr for AmplitudeDist {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(AmplitudeDist::Uniform),
            "log-uniform" => Ok(AmplitudeDist::LogUniform),
            other => Err(crate::Error::Config(format!(
                "unknown amplitude distribution `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub fs: f64,
    pub hypnogram: Hypnogram,
    /// Per-wave peak-to-peak amplitude range in µV.
    pub sw_pp_range: (f64, f64),
    pub sw_pp_dist: AmplitudeDist,
    /// Centre of the frequency process in Hz.
    pub freq_center_hz: f64,
    /// Stationary SD of log-frequency; 0 gives a fixed frequency.
    pub freq_log_sd: f64,
    /// Correlation time of the frequency walk in seconds.
    pub freq_corr_s: f64,
    pub freq_bounds_hz: (f64, f64),
    /// Pink noise RMS in µV.
    pub noise_rms: f64,
    /// N2 spindles per minute.
    pub spindle_rate_per_min: f64,
    pub spindle_pp: f64,
    /// Beta (15-30 Hz) RMS in µV during wake; scaled down in N1/REM.
    pub beta_rms: f64,
    /// Alpha (8-12 Hz) RMS in µV during wake.
    pub alpha_rms: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            fs: 250.0,
            hypnogram: Hypnogram::default_episode(),
            sw_pp_range: (20.0, 120.0),
            sw_pp_dist: AmplitudeDist::Uniform,
            freq_center_hz: 1.3,
            freq_log_sd: 0.3,
            freq_corr_s: 8.0,
            freq_bounds_hz: (0.5, 4.0),
            noise_rms: 10.0,
            spindle_rate_per_min: 4.0,
            spindle_pp: 30.0,
            beta_rms: 8.0,
            alpha_rms: 10.0,
            seed: 1,
        }
    }
}

impl SynthSpec {
    /// Noise-free fixed-frequency fixed-amplitude slow waves throughout N3.
    pub fn pure_sinusoid(freq_hz: f64, pp: f64, minutes: f64) -> Self {
        Self {
            hypnogram: Hypnogram::from_runs(&[(Stage::N3, minutes)]),
            sw_pp_range: (pp, pp),
            freq_center_hz: freq_hz,
            freq_log_sd: 0.0,
            noise_rms: 0.0,
            spindle_rate_per_min: 0.0,
            beta_rms: 0.0,
            alpha_rms: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs >= crate::dsp::MIN_SAMPLING_RATE) {
            return Err(invalid("fs", format!("{} below 100 Hz", self.fs)));
        }
        let (lo, hi) = self.sw_pp_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(invalid(
                "sw_pp_range",
                format!("({lo}, {hi}) must be positive and ordered"),
            ));
        }
        let (flo, fhi) = self.freq_bounds_hz;
        if !(flo > 0.0 && fhi > flo && fhi < self.fs / 2.0) {
            return Err(invalid("freq_bounds_hz", format!("({flo}, {fhi})")));
        }
        if !(self.freq_center_hz >= flo && self.freq_center_hz <= fhi) {
            return Err(invalid("freq_center_hz", "outside the frequency bounds"));
        }
        if !(self.freq_log_sd >= 0.0 && self.freq_corr_s > 0.0) {
            return Err(invalid("freq_log_sd", "spread must be >= 0 and correlation time > 0"));
        }
        for (name, v) in [
            ("noise_rms", self.noise_rms),
            ("spindle_rate_per_min", self.spindle_rate_per_min),
            ("spindle_pp", self.spindle_pp),
            ("beta_rms", self.beta_rms),
            ("alpha_rms", self.alpha_rms),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be non-negative"));
            }
        }
        if self.hypnogram.duration_s() < MIN_DURATION_S {
            return Err(invalid(
                "hypnogram",
                format!(
                    "{} s is shorter than the {} s minimum",
                    self.hypnogram.duration_s(),
                    MIN_DURATION_S
                ),
            ));
        }
        Ok(())
    }

    /// Expected fraction of drawn waves in the low (20-60 µV) class among
    /// waves of at least 20 µV.
    pub fn expected_low_fraction(&self) -> f64 {
        let (lo, hi) = self.sw_pp_range;
        if hi <= lo {
            return if (20.0..=60.0).contains(&lo) { 1.0 } else { 0.0 };
        }
        let d = self.sw_pp_dist;
        let sub20 = d.cdf(lo, hi, 20.0);
        if sub20 >= 1.0 {
            return 0.0;
        }
        (d.cdf(lo, hi, 60.0) - sub20) / (1.0 - sub20)
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub recording: EegRecording,
    /// Oscillator phase in degrees (0° at upward zero crossing) inside NREM
    /// epochs, NaN elsewhere.
    pub true_phase_deg: Vec<f64>,
    /// Peak-to-peak amplitude drawn for each generated wave, in order.
    pub wave_pp: Vec<f64>,
    pub hypnogram: Hypnogram,
}

/// Generates a recording. Deterministic for a fixed spec (including seed).
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let fs = spec.fs;
    let n = (spec.hypnogram.duration_s() * fs).round() as usize;
    let dt = 1.0 / fs;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let nrem_env = stage_envelope(&spec.hypnogram, n, fs, |s| s.is_nrem());
    let wake_env = stage_envelope(&spec.hypnogram, n, fs, |s| !s.is_nrem());
    let wake_scale: Vec<f64> = (0..n)
        .map(|i| match spec.hypnogram.stage_at(i as f64 * dt) {
            Some(Stage::Wake) => 1.0,
            Some(Stage::N1) => 0.5,
            Some(Stage::Rem) => 0.6,
            _ => 0.0,
        })
        .collect();

    // slow-wave oscillator
    let (log_lo, log_hi) = (spec.freq_bounds_hz.0.ln(), spec.freq_bounds_hz.1.ln());
    let log_c = spec.freq_center_hz.ln();
    let mut log_f = log_c;
    let walk = Normal::new(0.0, 1.0).expect("unit normal");
    let diffusion = spec.freq_log_sd * (2.0 * dt / spec.freq_corr_s).sqrt();
    let (pp_lo, pp_hi) = spec.sw_pp_range;
    let dist = spec.sw_pp_dist;
    let draw_pp = |rng: &mut ChaCha8Rng| {
        if pp_hi > pp_lo {
            dist.draw(pp_lo, pp_hi, rng.random::<f64>())
        } else {
            pp_lo
        }
    };
    let mut wave_pp = vec![draw_pp(&mut rng), draw_pp(&mut rng)];
    // psi unwrapped; start at a minimum so cycle 0 begins cleanly
    let mut psi = 1.5 * PI;
    let mut samples = vec![0.0; n];
    let mut true_phase = vec![f64::NAN; n];
    for i in 0..n {
        let u = (psi - 1.5 * PI) / TAU;
        let k = u.floor() as usize;
        while wave_pp.len() < k + 2 {
            let pp = draw_pp(&mut rng);
            wave_pp.push(pp);
        }
        let frac = u - k as f64;
        let a0 = wave_pp[k] / 2.0;
        let amp = if frac < 0.5 {
            a0
        } else {
            let a1 = wave_pp[k + 1] / 2.0;
            a0 + (a1 - a0) * 0.5 * (1.0 - (TAU * (frac - 0.5)).cos())
        };
        samples[i] = nrem_env[i] * amp * psi.sin();
        if spec.hypnogram.stage_at(i as f64 * dt).is_some_and(Stage::is_nrem) {
            true_phase[i] = crate::angle::rad_to_deg_wrapped(psi);
        }

        if diffusion > 0.0 {
            let z: f64 = walk.sample(&mut rng);
            log_f += -(log_f - log_c) * dt / spec.freq_corr_s + diffusion * z;
            if log_f > log_hi {
                log_f = 2.0 * log_hi - log_f;
            }
            if log_f < log_lo {
                log_f = 2.0 * log_lo - log_f;
            }
        }
        psi += TAU * log_f.exp() * dt;
    }
    // only waves that were actually rendered
    let rendered = ((psi - 1.5 * PI) / TAU).floor() as usize + 1;
    wave_pp.truncate(rendered);

    if spec.noise_rms > 0.0 {
        let noise = shaped_noise(
            n,
            fs,
            &mut rng,
            |f| if f <= 0.0 { 0.0 } else { 1.0 / f.max(0.5).sqrt() },
        );
        add_scaled(&mut samples, &noise, spec.noise_rms, None);
    }
    if spec.alpha_rms > 0.0 {
        let alpha = shaped_noise(n, fs, &mut rng, |f| band_gain(f, 8.0, 12.0));
        add_scaled(&mut samples, &alpha, spec.alpha_rms, Some((&wake_env, &wake_scale)));
    }
    if spec.beta_rms > 0.0 {
        let beta = shaped_noise(n, fs, &mut rng, |f| band_gain(f, 15.0, 30.0));
        add_scaled(&mut samples, &beta, spec.beta_rms, Some((&wake_env, &wake_scale)));
    }
    if spec.spindle_rate_per_min > 0.0 && spec.spindle_pp > 0.0 {
        add_spindles(&mut samples, spec, &mut rng);
    }

    let recording = EegRecording::new(samples, fs)?.with_hypnogram(spec.hypnogram.clone());
    Ok(SynthOutput {
        recording,
        true_phase_deg: true_phase,
        wave_pp,
        hypnogram: spec.hypnogram.clone(),
    })
}

/// Generates `count` recordings from `base` with seeds `seed, seed + 1, ...`.
pub fn dataset(base: &SynthSpec, count: usize, seed: u64) -> Result<Vec<SynthOutput>> {
    (0..count)
        .map(|i| {
            generate(&SynthSpec {
                seed: seed.wrapping_add(i as u64),
                ..base.clone()
            })
        })
        .collect()
}

/// 0..1 envelope: 1 inside runs of epochs where `active` holds, with
/// raised-cosine ramps of `STAGE_RAMP_S` at the inside edges of each run.
fn stage_envelope(hyp: &Hypnogram, n: usize, fs: f64, active: impl Fn(Stage) -> bool) -> Vec<f64> {
    let mut env = vec![0.0; n];
    let epoch_samples = (EPOCH_S * fs).round() as usize;
    let ramp = ((STAGE_RAMP_S * fs).round() as usize).max(1);
    let mut e = 0;
    while e < hyp.stages.len() {
        if !active(hyp.stages[e]) {
            e += 1;
            continue;
        }
        let start_epoch = e;
        while e < hyp.stages.len() && active(hyp.stages[e]) {
            e += 1;
        }
        let start = start_epoch * epoch_samples;
        let end = (e * epoch_samples).min(n);
        let len = end - start;
        for j in 0..len {
            let edge = j.min(len - 1 - j);
            env[start + j] = if edge >= ramp {
                1.0
            } else {
                0.5 * (1.0 - (PI * edge as f64 / ramp as f64).cos())
            };
        }
    }
    env
}

fn band_gain(f: f64, lo: f64, hi: f64) -> f64 {
    if f >= lo && f <= hi {
        1.0
    } else {
        0.0
    }
}

/// Gaussian white noise shaped in the frequency domain by `gain(f)` and
/// normalized to unit RMS.
fn shaped_noise(n: usize, fs: f64, rng: &mut ChaCha8Rng, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let kk = k.min(n - k);
        let f = kk as f64 * fs / n as f64;
        *v *= gain(f);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v /= rms);
    }
    out
}

fn add_scaled(dst: &mut [f64], src: &[f64], rms: f64, mask: Option<(&[f64], &[f64])>) {
    match mask {
        None => dst.iter_mut().zip(src).for_each(|(d, s)| *d += rms * s),
        Some((env, scale)) => {
            for i in 0..dst.len() {
                dst[i] += rms * env[i] * scale[i] * src[i];
            }
        }
    }
}

fn add_spindles(samples: &mut [f64], spec: &SynthSpec, rng: &mut ChaCha8Rng) {
    let fs = spec.fs;
    let n = samples.len();
    let rate_per_s = spec.spindle_rate_per_min / 60.0;
    let mut t = 0.0;
    loop {
        // exponential inter-arrival
        t += -(1.0 - rng.random::<f64>()).ln() / rate_per_s;
        let start = (t * fs) as usize;
        if start >= n {
            break;
        }
        let dur = 0.5 + rng.random::<f64>();
        let freq = 12.0 + 2.0 * rng.random::<f64>();
        let phase = TAU * rng.random::<f64>();
        if spec.hypnogram.stage_at(t) != Some(Stage::N2) || spec.hypnogram.stage_at(t + dur) != Some(Stage::N2) {
            continue;
        }
        let len = (dur * fs) as usize;
        for j in 0..len.min(n - start) {
            let w = 0.5 * (1.0 - (TAU * j as f64 / len as f64).cos());
            samples[start + j] += spec.spindle_pp / 2.0 * w * (TAU * freq * j as f64 / fs + phase).sin();
        }
    }
}
