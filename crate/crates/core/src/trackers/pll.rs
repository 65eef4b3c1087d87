use std::f64::consts::TAU;

use crate::angle::{rad_to_deg_wrapped, wrap_pi, wrap_tau};
use crate::dsp::IirSection;
use crate::error::Result;

use super::{Algorithm, OpCount, PhaseTracker, PhaseTrigger, TrackerConfig, TrackerStep, TriggerEvent};

/// Free-running NCO frequency.
pub const PLL_CENTER_HZ: f64 = 1.0;

/// NCO bookkeeping: `theta = w0 * n * dt + phi_p`, both kept wrapped.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PllState {
    /// NCO argument, radians in `[0, 2π)`.
    pub theta: f64,
    /// Accumulated phase correction, radians in `(-π, π]`.
    pub phi_p: f64,
}

/// First-order PLL: multiplier phase detector, no loop filter, NCO fixed at 1 Hz.
///
/// The error term `x_n * cos(theta_{n-1})` carries both the difference and
/// the sum-frequency component; the sum term is left in the loop. With a
/// positive gain the loop settles with `cos(theta)` in antiphase to the
/// input's quadrature, so `theta` sits a constant offset from the input
/// sine phase; the target phase absorbs it.
#[derive(Clone, Debug)]
pub struct PllTracker {
    state: PllState,
    gain: f64,
    step_rad: f64,
    pre_lowpass: Option<IirSection>,
    trigger: PhaseTrigger,
    index: u64,
    fs: f64,
    resets: u64,
}

impl PllTracker {
    pub fn new(cfg: &TrackerConfig, fs: f64) -> Result<Self> {
        cfg.validate()?;
        let pre_lowpass = cfg.pre_lowpass_hz.map(|f| IirSection::lowpass1(fs, f)).transpose()?;
        Ok(Self {
            state: PllState::default(),
            gain: cfg.k_pll,
            step_rad: TAU * PLL_CENTER_HZ / fs,
            pre_lowpass,
            trigger: PhaseTrigger::new(cfg.phi_t, cfg.refractory, fs),
            index: 0,
            fs,
            resets: 0,
        })
    }

    pub fn state(&self) -> PllState {
        self.state
    }

    /// Times the state went non-finite and was reset.
    pub fn resets(&self) -> u64 {
        self.resets
    }

    pub fn invalid_arcs(&self) -> u64 {
        self.trigger.invalid_arcs()
    }

    /// Advances the loop; returns the NCO phase in degrees and an optional trigger.
    #[inline]
    pub fn step_pll(&mut self, sample: f64) -> (f64, Option<TriggerEvent>) {
        let n = self.index;
        self.index += 1;
        let x = match self.pre_lowpass.as_mut() {
            Some(lp) => lp.process(sample),
            None => sample,
        };
        let err = x * self.state.theta.cos();
        let correction = self.gain * err;
        let phi_p = wrap_pi(self.state.phi_p - correction);
        let theta = wrap_tau(self.state.theta + self.step_rad - correction);
        if theta.is_finite() && phi_p.is_finite() {
            self.state = PllState { theta, phi_p };
        } else {
            self.state = PllState::default();
            self.resets += 1;
        }
        let phase = rad_to_deg_wrapped(self.state.theta);
        let fired = self.trigger.update(n, phase);
        let event = fired.then(|| TriggerEvent {
            sample_index: n,
            time_s: n as f64 / self.fs,
            algorithm: Algorithm::Pll,
            tracker_phase_deg: Some(phase),
            amplitude_uv: sample,
        });
        (phase, event)
    }
}

impl PhaseTracker for PllTracker {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Pll
    }

    fn step(&mut self, sample: f64) -> TrackerStep {
        let (phase, trigger) = self.step_pll(sample);
        TrackerStep {
            phase_deg: Some(phase),
            freq_hz: Some(PLL_CENTER_HZ),
            trigger,
        }
    }

    fn reset(&mut self) {
        self.state = PllState::default();
        self.trigger.reset();
        if let Some(lp) = self.pre_lowpass.as_mut() {
            lp.reset();
        }
        self.index = 0;
    }

    fn op_count(&self) -> OpCount {
        // cos, error product, gain, two phase updates with wraps, degree
        // conversion, crossing arithmetic
        OpCount {
            add: 6,
            mul: 4,
            div: 2,
            cmp: 6,
            transcendental: 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pll(k: f64, phi_t: f64) -> PllTracker {
        let cfg = TrackerConfig {
            algorithm: Algorithm::Pll,
            k_pll: k,
            phi_t,
            ..TrackerConfig::default()
        };
        PllTracker::new(&cfg, 250.0).unwrap()
    }

    #[test]
    fn zero_input_free_runs_at_one_hz() {
        let mut p = pll(1e-3, 45.0);
        let trig: Vec<u64> = (0..250 * 60)
            .filter_map(|_| p.step_pll(0.0).1.map(|e| e.sample_index))
            .collect();
        assert!(trig.len() >= 59);
        for w in trig.windows(2) {
            let d = w[1] - w[0];
            assert!((249..=251).contains(&d), "{d}");
        }
        assert_eq!(p.state().phi_p, 0.0);
    }

    #[test]
    fn gain_amplitude_product_invariance() {
        let mut a = pll(2e-3, 0.0);
        let mut b = pll(1e-3, 0.0);
        for n in 0..5000 {
            let x = 30.0 * (TAU * 1.2 * n as f64 / 250.0).sin() + 7.0 * (n as f64 * 0.37).cos();
            a.step_pll(x);
            b.step_pll(2.0 * x);
            assert_eq!(a.state().phi_p.to_bits(), b.state().phi_p.to_bits());
        }
    }

    #[test]
    fn non_finite_state_resets() {
        let mut p = pll(1e-3, 45.0);
        p.step_pll(f64::INFINITY);
        assert_eq!(p.resets(), 1);
        assert_eq!(p.state(), PllState::default());
    }
}
