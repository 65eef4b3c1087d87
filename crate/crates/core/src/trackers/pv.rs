use std::f64::consts::TAU;

use crate::angle::{rad_to_deg_wrapped, wrap_pi, wrap_tau};
use crate::dsp::IirSection;
use crate::error::Result;

use super::maf::MovingAverage;
use super::{Algorithm, OpCount, PhaseTracker, PhaseTrigger, TrackerConfig, TrackerStep, TriggerEvent};

pub const PV_MIN_HZ: f64 = 0.5;
pub const PV_MAX_HZ: f64 = 4.0;
pub const PV_INITIAL_HZ: f64 = 1.0;
/// Below this MAF vector magnitude (µV) the phase error is undefined.
pub const PV_DEGENERATE_EPS: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PvState {
    /// rad/s, clamped to `2π·[0.5, 4]`.
    pub omega_pv: f64,
    /// Oscillator argument, radians in `[0, 2π)`.
    pub theta_pv: f64,
    /// Last defined phase error (input phase minus argument), radians.
    pub phi_e: f64,
}

impl Default for PvState {
    fn default() -> Self {
        Self {
            omega_pv: TAU * PV_INITIAL_HZ,
            theta_pv: 0.0,
            phi_e: 0.0,
        }
    }
}

/// Phase vocoder: quadrature mixing with the running argument, moving
/// averages on both channels, polar conversion to a phase error and a
/// frequency update from successive phase-error differences.
///
/// The reported phase is the demodulated input phase `theta_pv + phi_e`
/// (0° at the upward zero crossing of a sine input).
#[derive(Clone, Debug)]
pub struct PvTracker {
    state: PvState,
    maf_i: MovingAverage,
    maf_q: MovingAverage,
    gain: f64,
    dt: f64,
    /// Previous defined phase error for differencing; cleared after a hold.
    prev_phi_e: Option<f64>,
    pre_lowpass: Option<IirSection>,
    trigger: PhaseTrigger,
    index: u64,
    fs: f64,
    holds: u64,
}

impl PvTracker {
    pub fn new(cfg: &TrackerConfig, fs: f64) -> Result<Self> {
        cfg.validate()?;
        let pre_lowpass = cfg.pre_lowpass_hz.map(|f| IirSection::lowpass1(fs, f)).transpose()?;
        Ok(Self {
            state: PvState::default(),
            maf_i: MovingAverage::new(cfg.fs_span),
            maf_q: MovingAverage::new(cfg.fs_span),
            gain: cfg.k_pv,
            dt: 1.0 / fs,
            prev_phi_e: None,
            pre_lowpass,
            trigger: PhaseTrigger::new(cfg.phi_t, cfg.refractory, fs),
            index: 0,
            fs,
            holds: 0,
        })
    }

    pub fn state(&self) -> PvState {
        self.state
    }

    pub fn freq_hz(&self) -> f64 {
        self.state.omega_pv / TAU
    }

    /// Samples on which the MAF vector was degenerate and phi_e was held.
    pub fn holds(&self) -> u64 {
        self.holds
    }

    pub fn invalid_arcs(&self) -> u64 {
        self.trigger.invalid_arcs()
    }

    /// Returns (phase estimate in degrees, frequency estimate in Hz, trigger).
    #[inline]
    pub fn step_pv(&mut self, sample: f64) -> (f64, f64, Option<TriggerEvent>) {
        let n = self.index;
        self.index += 1;
        let x = match self.pre_lowpass.as_mut() {
            Some(lp) => lp.process(sample),
            None => sample,
        };
        let (s, c) = self.state.theta_pv.sin_cos();
        let i = self.maf_i.push(x * s);
        let q = self.maf_q.push(x * c);

        if i.hypot(q) < PV_DEGENERATE_EPS {
            self.holds += 1;
            self.prev_phi_e = None;
        } else {
            let phi_e = q.atan2(i);
            if let Some(prev) = self.prev_phi_e {
                let d = wrap_pi(phi_e - prev);
                let omega = self.state.omega_pv + self.gain * d / self.dt;
                self.state.omega_pv = omega.clamp(TAU * PV_MIN_HZ, TAU * PV_MAX_HZ);
            }
            self.prev_phi_e = Some(phi_e);
            self.state.phi_e = phi_e;
        }

        let phase = rad_to_deg_wrapped(self.state.theta_pv + self.state.phi_e);
        self.state.theta_pv = wrap_tau(self.state.theta_pv + self.state.omega_pv * self.dt);

        let fired = self.trigger.update(n, phase);
        let event = fired.then(|| TriggerEvent {
            sample_index: n,
            time_s: n as f64 / self.fs,
            algorithm: Algorithm::Pv,
            tracker_phase_deg: Some(phase),
            amplitude_uv: sample,
        });
        (phase, self.state.omega_pv / TAU, event)
    }
}

impl PhaseTracker for PvTracker {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Pv
    }

    fn step(&mut self, sample: f64) -> TrackerStep {
        let (phase, freq, trigger) = self.step_pv(sample);
        TrackerStep {
            phase_deg: Some(phase),
            freq_hz: Some(freq),
            trigger,
        }
    }

    fn reset(&mut self) {
        self.state = PvState::default();
        self.maf_i.reset();
        self.maf_q.reset();
        self.prev_phi_e = None;
        self.trigger.reset();
        if let Some(lp) = self.pre_lowpass.as_mut() {
            lp.reset();
        }
        self.index = 0;
        self.holds = 0;
    }

    fn op_count(&self) -> OpCount {
        // sin_cos, two mixer products, two running-sum MAFs, hypot, atan2,
        // frequency update with clamp, argument advance, degree conversion
        OpCount {
            add: 12,
            mul: 8,
            div: 3,
            cmp: 9,
            transcendental: 4,
        }
    }
}
