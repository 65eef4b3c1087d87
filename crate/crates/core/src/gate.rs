//! Stimulation gate: NREM detection from 80 s of band powers, slow-wave
//! activity and beta checks on the last 4 s, and the ON/OFF protocol.
//!
//! The gate never feeds back into the trackers. It only decides whether a
//! candidate trigger is delivered.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::dsp::{Band, BandPowerEstimator, PreprocessConfig, Preprocessor};
use crate::error::{invalid, Error, Result};
use crate::recording::{Hypnogram, Stage};
use crate::synth::{generate, SynthSpec};
use crate::trackers::TriggerEvent;

pub const NREM_LOW_BAND: Band = Band::new(0.5, 2.0);
pub const NREM_HIGH_BAND: Band = Band::new(2.0, 4.0);
pub const NREM_BETA_BAND: Band = Band::new(20.0, 30.0);
pub const SWA_BAND: Band = Band::new(0.5, 4.0);
pub const BETA_BAND: Band = Band::new(17.0, 22.0);

#[derive(Clone, Debug, PartialEq)]
pub struct GateConfig {
    /// Mean 0.5-2 Hz power over the history must exceed this (µV²).
    pub nrem_low_threshold: f64,
    /// Mean 2-4 Hz power over the history must exceed this (µV²).
    pub nrem_high_threshold: f64,
    /// Mean 20-30 Hz power over the history must stay below this (µV²).
    pub nrem_beta_threshold: f64,
    /// 0.5-4 Hz power of the last window (µV²).
    pub swa_threshold: f64,
    /// 17-22 Hz power of the last window (µV²).
    pub beta_threshold: f64,
    pub window_step_s: f64,
    pub nrem_history_s: f64,
    pub onoff_period_s: f64,
    pub onoff_enabled: bool,
}

impl Default for GateConfig {
    /// Thresholds from [`calibrate`] on the default synthetic spec, rounded.
    fn default() -> Self {
        Self {
            nrem_low_threshold: 120.0,
            nrem_high_threshold: 16.0,
            nrem_beta_threshold: 7.5,
            swa_threshold: 150.0,
            beta_threshold: 5.5,
            window_step_s: 4.0,
            nrem_history_s: 80.0,
            onoff_period_s: 6.0,
            onoff_enabled: false,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("nrem_low_threshold", self.nrem_low_threshold),
            ("nrem_high_threshold", self.nrem_high_threshold),
            ("nrem_beta_threshold", self.nrem_beta_threshold),
            ("swa_threshold", self.swa_threshold),
            ("beta_threshold", self.beta_threshold),
            ("onoff_period_s", self.onoff_period_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        if !(self.window_step_s >= crate::dsp::MIN_WINDOW_S) {
            return Err(invalid("window_step_s", "must be at least 2 s"));
        }
        let ratio = self.nrem_history_s / self.window_step_s;
        if !(ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9) {
            return Err(invalid(
                "nrem_history_s",
                "must be a positive integer multiple of window_step_s",
            ));
        }
        Ok(())
    }

    pub fn history_windows(&self) -> usize {
        (self.nrem_history_s / self.window_step_s).round() as usize
    }
}

/// Band powers of one gate window.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WindowPowers {
    pub nrem_low: f64,
    pub nrem_high: f64,
    pub nrem_beta: f64,
    pub swa: f64,
    pub beta: f64,
}

impl WindowPowers {
    pub fn from_estimator(est: &BandPowerEstimator) -> Result<Self> {
        Ok(Self {
            nrem_low: est.band(NREM_LOW_BAND)?.power,
            nrem_high: est.band(NREM_HIGH_BAND)?.power,
            nrem_beta: est.band(NREM_BETA_BAND)?.power,
            swa: est.band(SWA_BAND)?.power,
            beta: est.band(BETA_BAND)?.power,
        })
    }

    pub fn measure(window: &[f64], fs: f64) -> Result<Self> {
        let mut est = BandPowerEstimator::new(fs, window.len())?;
        est.load(window.iter().copied());
        Self::from_estimator(&est)
    }
}

/// NREM decision over a full history; an incomplete history is never NREM.
pub fn nrem_detect(history: &[WindowPowers], cfg: &GateConfig) -> bool {
    let need = cfg.history_windows();
    if history.len() < need {
        return false;
    }
    let recent = &history[history.len() - need..];
    let mean = |f: fn(&WindowPowers) -> f64| recent.iter().map(f).sum::<f64>() / need as f64;
    mean(|w| w.nrem_low) > cfg.nrem_low_threshold
        && mean(|w| w.nrem_high) > cfg.nrem_high_threshold
        && mean(|w| w.nrem_beta) < cfg.nrem_beta_threshold
}

pub fn swa_detect(window: &WindowPowers, cfg: &GateConfig) -> bool {
    window.swa >= cfg.swa_threshold
}

pub fn beta_inhibit(window: &WindowPowers, cfg: &GateConfig) -> bool {
    window.beta >= cfg.beta_threshold
}

/// ON half of the ON/OFF cycle: `floor(t / period)` even.
pub fn on_window(index: u64, fs: f64, cfg: &GateConfig) -> bool {
    (((index as f64 / fs) / cfg.onoff_period_s).floor() as u64).is_multiple_of(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SuppressionReason {
    Nrem,
    Swa,
    Beta,
    OnOff,
}

impl SuppressionReason {
    pub const ALL: [SuppressionReason; 4] = [
        SuppressionReason::Nrem,
        SuppressionReason::Swa,
        SuppressionReason::Beta,
        SuppressionReason::OnOff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuppressionReason::Nrem => "nrem",
            SuppressionReason::Swa => "swa",
            SuppressionReason::Beta => "beta",
            SuppressionReason::OnOff => "onoff",
        }
    }
}

impl fmt::Display for SuppressionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuppressionReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nrem" => Ok(SuppressionReason::Nrem),
            "swa" => Ok(SuppressionReason::Swa),
            "beta" => Ok(SuppressionReason::Beta),
            "onoff" => Ok(SuppressionReason::OnOff),
            other => Err(Error::Config(format!("unknown suppression reason `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateDecision {
    Delivered,
    Suppressed(SuppressionReason),
}

impl GateDecision {
    pub fn is_delivered(self) -> bool {
        matches!(self, GateDecision::Delivered)
    }

    pub fn reason(self) -> Option<SuppressionReason> {
        match self {
            GateDecision::Delivered => None,
            GateDecision::Suppressed(r) => Some(r),
        }
    }
}

/// Gate flags in effect at one sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GateState {
    pub nrem: bool,
    pub swa: bool,
    pub beta_inhibit: bool,
    pub on_window: bool,
    /// Completed windows so far.
    pub windows_seen: u64,
}

impl GateState {
    /// Device-side NREM with slow-wave activity.
    pub fn qualifying(&self) -> bool {
        self.nrem && self.swa
    }
}

/// Delivery decision for a candidate; the first failing condition in the
/// order nrem, swa, beta, onoff is reported.
pub fn gate_step(_candidate: &TriggerEvent, state: &GateState, cfg: &GateConfig) -> GateDecision {
    decide(state, cfg)
}

fn decide(state: &GateState, cfg: &GateConfig) -> GateDecision {
    use SuppressionReason::*;
    if !state.nrem {
        GateDecision::Suppressed(Nrem)
    } else if !state.swa {
        GateDecision::Suppressed(Swa)
    } else if state.beta_inhibit {
        GateDecision::Suppressed(Beta)
    } else if cfg.onoff_enabled && !state.on_window {
        GateDecision::Suppressed(OnOff)
    } else {
        GateDecision::Delivered
    }
}

/// Streaming gate. Flags change only when a window completes.
pub struct Gate {
    cfg: GateConfig,
    fs: f64,
    est: BandPowerEstimator,
    block: Vec<f64>,
    history: VecDeque<WindowPowers>,
    flags: GateState,
    index: u64,
}

impl Gate {
    pub fn new(cfg: &GateConfig, fs: f64) -> Result<Self> {
        cfg.validate()?;
        let step = (cfg.window_step_s * fs).round() as usize;
        Ok(Self {
            cfg: cfg.clone(),
            fs,
            est: BandPowerEstimator::new(fs, step)?,
            block: Vec::with_capacity(step),
            history: VecDeque::with_capacity(cfg.history_windows() + 1),
            flags: GateState::default(),
            index: 0,
        })
    }

    pub fn config(&self) -> &GateConfig {
        &self.cfg
    }

    /// Flags in effect for the next sample.
    pub fn state(&self) -> GateState {
        GateState {
            on_window: on_window(self.index, self.fs, &self.cfg),
            ..self.flags
        }
    }

    pub fn decide(&self, state: &GateState) -> GateDecision {
        decide(state, &self.cfg)
    }

    /// Returns the flags in effect for `x`, then absorbs it.
    pub fn step(&mut self, x: f64) -> GateState {
        let state = self.state();
        self.block.push(x);
        self.index += 1;
        if self.block.len() == self.est.len() {
            self.est.load(self.block.iter().copied());
            let w = WindowPowers::from_estimator(&self.est).expect("gate bands below Nyquist");
            self.block.clear();
            self.history.push_back(w);
            if self.history.len() > self.cfg.history_windows() {
                self.history.pop_front();
            }
            self.flags = GateState {
                nrem: nrem_detect(self.history.make_contiguous(), &self.cfg),
                swa: swa_detect(&w, &self.cfg),
                beta_inhibit: beta_inhibit(&w, &self.cfg),
                on_window: false,
                windows_seen: self.flags.windows_seen + 1,
            };
        }
        state
    }
}

/// Gate flags over a whole preprocessed recording, one entry per window.
#[derive(Clone, Debug, PartialEq)]
pub struct GateTimeline {
    /// Samples per window.
    pub step: usize,
    /// `flags[w]` is in effect for samples `[w * step, (w + 1) * step)`.
    pub flags: Vec<GateState>,
    pub fs: f64,
    pub onoff_period_s: f64,
}

impl GateTimeline {
    pub fn compute(xs: &[f64], fs: f64, cfg: &GateConfig) -> Result<Self> {
        let mut gate = Gate::new(cfg, fs)?;
        let step = gate.est.len();
        let mut flags = Vec::with_capacity(xs.len() / step + 1);
        for (i, &x) in xs.iter().enumerate() {
            let s = gate.step(x);
            if i % step == 0 {
                flags.push(s);
            }
        }
        Ok(Self {
            step,
            flags,
            fs,
            onoff_period_s: cfg.onoff_period_s,
        })
    }

    pub fn at(&self, index: usize) -> GateState {
        let mut s = self.flags.get(index / self.step).copied().unwrap_or_default();
        s.on_window = (((index as f64 / self.fs) / self.onoff_period_s).floor() as u64).is_multiple_of(2);
        s
    }

    /// Per-sample device NREM with slow-wave activity.
    pub fn qualifying_mask(&self, n: usize) -> Vec<bool> {
        (0..n)
            .map(|i| self.flags.get(i / self.step).is_some_and(GateState::qualifying))
            .collect()
    }
}

/// Per-band medians of the two classes used to place the thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub nrem: WindowPowers,
    pub other: WindowPowers,
    pub config: GateConfig,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn window_medians(xs: &[f64], fs: f64, step_s: f64) -> Result<WindowPowers> {
    let step = (step_s * fs).round() as usize;
    let ws = xs
        .chunks_exact(step)
        .map(|c| WindowPowers::measure(c, fs))
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&WindowPowers) -> f64| median(ws.iter().map(f).collect());
    Ok(WindowPowers {
        nrem_low: pick(|w| w.nrem_low),
        nrem_high: pick(|w| w.nrem_high),
        nrem_beta: pick(|w| w.nrem_beta),
        swa: pick(|w| w.swa),
        beta: pick(|w| w.beta),
    })
}

/// Places every threshold at the geometric mean of the NREM and non-NREM
/// window medians of synthetic recordings generated from `base`.
pub fn calibrate(base: &SynthSpec) -> Result<Calibration> {
    let classes = [
        Hypnogram::from_runs(&[(Stage::N2, 8.0), (Stage::N3, 8.0)]),
        Hypnogram::from_runs(&[(Stage::Wake, 6.0), (Stage::N1, 4.0), (Stage::Rem, 6.0)]),
    ];
    let mut medians = Vec::with_capacity(2);
    let step_s = GateConfig::default().window_step_s;
    for hyp in classes {
        let spec = SynthSpec {
            hypnogram: hyp,
            ..base.clone()
        };
        let out = generate(&spec)?;
        let mut pre = Preprocessor::new(spec.fs, &PreprocessConfig::default())?;
        let xs = pre.run(&out.recording.samples)?;
        // skip the high-pass settling
        let skip = (20.0 * spec.fs) as usize;
        medians.push(window_medians(&xs[skip..], spec.fs, step_s)?);
    }
    let (nrem, other) = (medians[0], medians[1]);
    let g = |a: f64, b: f64| (a * b).sqrt();
    let config = GateConfig {
        nrem_low_threshold: g(nrem.nrem_low, other.nrem_low),
        nrem_high_threshold: g(nrem.nrem_high, other.nrem_high),
        nrem_beta_threshold: g(nrem.nrem_beta, other.nrem_beta),
        swa_threshold: g(nrem.swa, other.swa),
        beta_threshold: g(nrem.beta, other.beta),
        ..GateConfig::default()
    };
    config.validate()?;
    Ok(Calibration { nrem, other, config })
}
