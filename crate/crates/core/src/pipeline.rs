//! Causal streaming chain: preprocess, tracker, gate.

use crate::dsp::{PreprocessConfig, Preprocessor};
use crate::error::Result;
use crate::gate::{Gate, GateConfig, GateDecision, GateState};
use crate::trackers::{Algorithm, PhaseTracker, TrackerConfig, TrackerStep};

/// One row of the trigger log.
#[derive(Clone, Debug, PartialEq)]
pub struct LoggedTrigger {
    pub sample_index: u64,
    pub time_s: f64,
    pub algorithm: Algorithm,
    pub tracker_phase_deg: Option<f64>,
    pub decision: GateDecision,
    pub on_window: bool,
}

impl LoggedTrigger {
    pub fn delivered(&self) -> bool {
        self.decision.is_delivered()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub tracker: TrackerConfig,
    pub gate: GateConfig,
}

/// Output of one pipeline step.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineStep {
    pub preprocessed: f64,
    pub tracker: TrackerStep,
    pub gate: GateState,
    pub logged: Option<LoggedTrigger>,
}

pub struct Pipeline {
    pre: Preprocessor,
    tracker: Box<dyn PhaseTracker>,
    gate: Gate,
}

impl Pipeline {
    pub fn new(cfg: &PipelineConfig, fs: f64) -> Result<Self> {
        Ok(Self {
            pre: Preprocessor::new(fs, &cfg.preprocess)?,
            tracker: cfg.tracker.build(fs)?,
            gate: Gate::new(&cfg.gate, fs)?,
        })
    }

    pub fn with_tracker(cfg: &PipelineConfig, fs: f64, tracker: Box<dyn PhaseTracker>) -> Result<Self> {
        Ok(Self {
            pre: Preprocessor::new(fs, &cfg.preprocess)?,
            tracker,
            gate: Gate::new(&cfg.gate, fs)?,
        })
    }

    pub fn tracker(&self) -> &dyn PhaseTracker {
        self.tracker.as_ref()
    }

    /// Processes one raw sample; fails on non-finite input.
    #[inline]
    pub fn step(&mut self, raw: f64) -> Result<PipelineStep> {
        let x = self.pre.step(raw)?;
        let tracker = self.tracker.step(x);
        let gate = self.gate.step(x);
        let logged = tracker.trigger.as_ref().map(|ev| LoggedTrigger {
            sample_index: ev.sample_index,
            time_s: ev.time_s,
            algorithm: ev.algorithm,
            tracker_phase_deg: ev.tracker_phase_deg,
            decision: self.gate.decide(&gate),
            on_window: gate.on_window,
        });
        Ok(PipelineStep {
            preprocessed: x,
            tracker,
            gate,
            logged,
        })
    }
}

/// Streams `samples` through the pipeline and returns every candidate.
pub fn run_pipeline<I>(samples: I, fs: f64, cfg: &PipelineConfig) -> Result<Vec<LoggedTrigger>>
where
    I: IntoIterator<Item = f64>,
{
    let mut p = Pipeline::new(cfg, fs)?;
    let mut out = Vec::new();
    for x in samples {
        if let Some(t) = p.step(x)?.logged {
            out.push(t);
        }
    }
    Ok(out)
}
