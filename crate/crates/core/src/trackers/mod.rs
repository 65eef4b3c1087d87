//! Real-time slow-wave phase trackers and trigger emission.
//!
//! Every tracker consumes one preprocessed sample at a time and never looks
//! ahead. The phase-based trackers (PLL, PV) emit a trigger when their phase
//! estimate crosses the target phase; the amplitude-threshold tracker emits
//! on an upward threshold crossing. All triggers respect a refractory
//! interval (0.25 s by default, i.e. at most 4 Hz).

mod at;
mod maf;
mod pll;
mod pv;

use std::fmt;
use std::str::FromStr;

pub use at::AtTracker;
pub use maf::MovingAverage;
pub use pll::{PllState, PllTracker, PLL_CENTER_HZ};
pub use pv::{PvState, PvTracker, PV_DEGENERATE_EPS, PV_MAX_HZ, PV_MIN_HZ};

use crate::angle::wrap_deg;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    At,
    Pll,
    Pv,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::At, Algorithm::Pll, Algorithm::Pv];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::At => "AT",
            Algorithm::Pll => "PLL",
            Algorithm::Pv => "PV",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AT" => Ok(Algorithm::At),
            "PLL" => Ok(Algorithm::Pll),
            "PV" => Ok(Algorithm::Pv),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

pub const DEFAULT_REFRACTORY_S: f64 = 0.25;

/// Parameters of one tracker.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    pub algorithm: Algorithm,
    /// Target phase in degrees, `[0, 360)`.
    pub phi_t: f64,
    /// Combined phase-detector and NCO gain.
    pub k_pll: f64,
    /// Frequency-error gain of the phase vocoder.
    pub k_pv: f64,
    /// Moving-average span in samples.
    pub fs_span: usize,
    /// Microvolts.
    pub at_threshold: f64,
    /// Seconds.
    pub refractory: f64,
    /// Optional first-order low-pass in front of PLL/PV, in Hz.
    pub pre_lowpass_hz: Option<f64>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Pv,
            phi_t: 45.0,
            k_pll: 1e-3,
            k_pv: 1e-2,
            fs_span: 125,
            at_threshold: 50.0,
            refractory: DEFAULT_REFRACTORY_S,
            pre_lowpass_hz: None,
        }
    }
}

impl TrackerConfig {
    pub fn with_algorithm(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..360.0).contains(&self.phi_t) {
            return Err(invalid("phi_t", format!("{} not in [0, 360)", self.phi_t)));
        }
        if !(self.k_pll > 0.0 && self.k_pll.is_finite()) {
            return Err(invalid("k_pll", "must be positive"));
        }
        if !(self.k_pv > 0.0 && self.k_pv.is_finite()) {
            return Err(invalid("k_pv", "must be positive"));
        }
        if self.fs_span < 1 {
            return Err(invalid("fs_span", "must be at least 1 sample"));
        }
        if !(self.at_threshold > 0.0 && self.at_threshold.is_finite()) {
            return Err(invalid("at_threshold", "must be positive"));
        }
        if !(self.refractory > 0.0 && self.refractory.is_finite()) {
            return Err(invalid("refractory", "must be positive"));
        }
        if let Some(f) = self.pre_lowpass_hz {
            if !(f > 0.0) {
                return Err(invalid("pre_lowpass_hz", "must be positive"));
            }
        }
        Ok(())
    }

    /// Builds the tracker described by this configuration.
    pub fn build(&self, fs: f64) -> Result<Box<dyn PhaseTracker>> {
        Ok(match self.algorithm {
            Algorithm::At => Box::new(AtTracker::new(self, fs)?),
            Algorithm::Pll => Box::new(PllTracker::new(self, fs)?),
            Algorithm::Pv => Box::new(PvTracker::new(self, fs)?),
        })
    }
}

/// A stimulation trigger emitted by a tracker.
#[derive(Clone, Debug, PartialEq)]
pub struct TriggerEvent {
    pub sample_index: u64,
    pub time_s: f64,
    pub algorithm: Algorithm,
    /// The tracker's own phase estimate; `None` for the amplitude threshold.
    pub tracker_phase_deg: Option<f64>,
    /// Preprocessed EEG value at emission.
    pub amplitude_uv: f64,
}

/// Output of one tracker step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackerStep {
    pub phase_deg: Option<f64>,
    pub freq_hz: Option<f64>,
    pub trigger: Option<TriggerEvent>,
}

/// Static per-step arithmetic counts, a hardware-independent cost measure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCount {
    pub add: u32,
    pub mul: u32,
    pub div: u32,
    pub cmp: u32,
    /// Transcendental calls (sin, cos, atan2, hypot).
    pub transcendental: u32,
}

impl OpCount {
    pub fn total(&self) -> u32 {
        self.add + self.mul + self.div + self.cmp + self.transcendental
    }
}

/// Common interface of the streaming trackers.
pub trait PhaseTracker: Send {
    fn algorithm(&self) -> Algorithm;
    /// Advances by one preprocessed sample.
    fn step(&mut self, sample: f64) -> TrackerStep;
    fn reset(&mut self);
    fn op_count(&self) -> OpCount;
}

/// True iff `phi_t` lies in the forward arc `(prev, cur]` and that arc is
/// shorter than 180 degrees. All arguments in `[0, 360)`.
pub fn crossing_detector(prev_deg: f64, cur_deg: f64, phi_t: f64) -> bool {
    let arc = wrap_deg(cur_deg - prev_deg);
    if arc >= 180.0 || arc == 0.0 {
        return false;
    }
    let to_target = wrap_deg(phi_t - prev_deg);
    to_target > 0.0 && to_target <= arc
}

/// Minimum trigger spacing in samples for a refractory time in seconds.
pub fn refractory_samples(refractory_s: f64, fs: f64) -> u64 {
    (refractory_s * fs - 1e-9).ceil().max(1.0) as u64
}

/// Refractory bookkeeping shared by every tracker.
#[derive(Clone, Debug)]
pub struct Refractory {
    min_gap: u64,
    last: Option<u64>,
}

impl Refractory {
    pub fn new(refractory_s: f64, fs: f64) -> Self {
        Self {
            min_gap: refractory_samples(refractory_s, fs),
            last: None,
        }
    }

    /// Records and allows a trigger at `index` unless it falls inside the
    /// refractory interval of the previous one.
    #[inline]
    pub fn try_fire(&mut self, index: u64) -> bool {
        match self.last {
            Some(l) if index - l < self.min_gap => false,
            _ => {
                self.last = Some(index);
                true
            }
        }
    }

    pub fn reset(&mut self) {
        self.last = None;
    }
}

/// Target-phase crossing state with refractory limit and slip diagnostics.
#[derive(Clone, Debug)]
pub struct PhaseTrigger {
    phi_t: f64,
    prev: Option<f64>,
    refractory: Refractory,
    invalid_arcs: u64,
}

impl PhaseTrigger {
    pub fn new(phi_t: f64, refractory_s: f64, fs: f64) -> Self {
        Self {
            phi_t,
            prev: None,
            refractory: Refractory::new(refractory_s, fs),
            invalid_arcs: 0,
        }
    }

    /// Feeds the phase estimate at `index`; true when a trigger fires.
    #[inline]
    pub fn update(&mut self, index: u64, phase_deg: f64) -> bool {
        let fired = match self.prev {
            Some(prev) => {
                if wrap_deg(phase_deg - prev) >= 180.0 {
                    self.invalid_arcs += 1;
                    false
                } else {
                    crossing_detector(prev, phase_deg, self.phi_t) && self.refractory.try_fire(index)
                }
            }
            None => false,
        };
        self.prev = Some(phase_deg);
        fired
    }

    /// Count of steps whose forward arc was 180 degrees or more.
    pub fn invalid_arcs(&self) -> u64 {
        self.invalid_arcs
    }

    pub fn reset(&mut self) {
        self.prev = None;
        self.refractory.reset();
        self.invalid_arcs = 0;
    }
}

/// Trigger sample indices obtained by replaying a recorded phase trace
/// through a fresh [`PhaseTrigger`]. Identical to what the online tracker
/// emits for the same target phase.
pub fn triggers_from_phase_trace(trace: &[f64], phi_t: f64, refractory_s: f64, fs: f64) -> Vec<u64> {
    let mut trig = PhaseTrigger::new(phi_t, refractory_s, fs);
    trace
        .iter()
        .enumerate()
        .filter_map(|(n, &p)| trig.update(n as u64, p).then_some(n as u64))
        .collect()
}

/// Upward threshold crossings (`prev < threshold <= cur`) of a filtered
/// trace with refractory limit.
pub fn triggers_from_threshold(trace: &[f64], threshold: f64, refractory_s: f64, fs: f64) -> Vec<u64> {
    let mut refr = Refractory::new(refractory_s, fs);
    let mut out = Vec::new();
    for n in 1..trace.len() {
        if trace[n - 1] < threshold && trace[n] >= threshold && refr.try_fire(n as u64) {
            out.push(n as u64);
        }
    }
    out
}

/// Runs a tracker over a whole preprocessed buffer, collecting its phase
/// estimates (degrees). Samples without an estimate map to NaN.
pub fn phase_trace(tracker: &mut dyn PhaseTracker, xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| tracker.step(x).phase_deg.unwrap_or(f64::NAN))
        .collect()
}
