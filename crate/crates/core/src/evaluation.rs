//! Scoring of trigger sequences against the offline ground truth.
//!
//! A trigger is scored when it was delivered and falls inside a qualifying
//! 2 s window: scored NREM, device NREM with slow-wave activity, and inside
//! the oracle's valid region for the whole window.

use std::ops::{Add, AddAssign};

use crate::dsp::{PreprocessConfig, Preprocessor, SampleStream};
use crate::error::Result;
use crate::gate::{GateConfig, GateTimeline, SuppressionReason};
use crate::metrics::{
    circular_from_sums, circular_histogram, cmae45_of_mean, detect_waves, in_up_phase, pas_from_counts,
    qualifying_windows, targeting_capacity, trigger_intervals, CircularSummary, IntervalStats, PasReport, SlowWave,
    TargetingCapacity, HISTOGRAM_BINS,
};
use crate::oracle::{ground_truth, GroundTruth, OracleConfig};
use crate::pipeline::LoggedTrigger;
use crate::recording::EegRecording;
use crate::trackers::Algorithm;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalConfig {
    pub preprocess: PreprocessConfig,
    pub gate: GateConfig,
    pub oracle: OracleConfig,
}

/// Everything about one recording that does not depend on the tracker.
#[derive(Clone, Debug)]
pub struct PreparedRecording {
    pub fs: f64,
    pub preprocessed: Vec<f64>,
    pub truth: GroundTruth,
    pub timeline: GateTimeline,
    /// Samples inside qualifying 2 s windows.
    pub window_mask: Vec<bool>,
    /// `window_mask` minus samples where beta inhibits delivery.
    pub score_mask: Vec<bool>,
    pub windows: usize,
    /// 2 s windows inside scored NREM and the oracle region, ignoring the device.
    pub scored_nrem_windows: usize,
    /// Scored NREM inside the oracle region.
    pub nrem_valid_mask: Vec<bool>,
    pub waves: Vec<SlowWave>,
}

impl PreparedRecording {
    pub fn prepare(rec: &EegRecording, cfg: &EvalConfig) -> Result<Self> {
        let fs = rec.fs;
        let n = rec.len();
        let preprocessed = Preprocessor::new(fs, &cfg.preprocess)?.run(&rec.samples)?;
        let truth = ground_truth(&SampleStream::new(rec.samples.clone(), fs)?, &cfg.oracle)?;
        let timeline = GateTimeline::compute(&preprocessed, fs, &cfg.gate)?;
        let scored = match &rec.hypnogram {
            Some(h) => h.nrem_mask(n, fs),
            None => vec![true; n],
        };
        let base: Vec<bool> = (0..n).map(|i| scored[i] && truth.track.is_valid(i)).collect();
        let device = timeline.qualifying_mask(n);
        let both: Vec<bool> = base.iter().zip(&device).map(|(a, b)| *a && *b).collect();
        let (window_mask, windows) = qualifying_windows(&both, fs);
        let (_, scored_nrem_windows) = qualifying_windows(&base, fs);
        let score_mask: Vec<bool> = window_mask
            .iter()
            .enumerate()
            .map(|(i, &w)| w && !timeline.at(i).beta_inhibit)
            .collect();
        let waves = detect_waves(&truth.filtered.samples, fs, &window_mask);
        Ok(Self {
            fs,
            preprocessed,
            truth,
            timeline,
            window_mask,
            score_mask,
            windows,
            scored_nrem_windows,
            nrem_valid_mask: base,
            waves,
        })
    }

    pub fn len(&self) -> usize {
        self.preprocessed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preprocessed.is_empty()
    }

    /// Sufficient statistics of candidate triggers under a gate without the
    /// ON/OFF protocol.
    pub fn stats(&self, candidates: &[u64]) -> TriggerStats {
        let mut st = TriggerStats {
            windows: self.windows,
            ..TriggerStats::default()
        };
        for &t in candidates {
            let i = t as usize;
            if self.score_mask.get(i).copied().unwrap_or(false) {
                st.push(self.truth.track.phase_deg[i]);
            }
        }
        st
    }
}

/// Pooled trigger statistics from which every optimization objective follows.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TriggerStats {
    pub sum_cos: f64,
    pub sum_sin: f64,
    pub n_all: usize,
    pub n_in_up: usize,
    pub windows: usize,
}

impl TriggerStats {
    #[inline]
    pub fn push(&mut self, phase_deg: f64) {
        let (s, c) = crate::angle::sincos_deg(phase_deg);
        self.sum_cos += c;
        self.sum_sin += s;
        self.n_all += 1;
        self.n_in_up += usize::from(in_up_phase(phase_deg));
    }

    /// Normalized objectives; a missing circular mean counts as the worst
    /// CMAE and no windows as no stimulation.
    pub fn objectives(&self) -> Objectives {
        let cmae = circular_from_sums(self.sum_cos, self.sum_sin, self.n_all)
            .map(|c| cmae45_of_mean(c.mean_deg).0)
            .unwrap_or(1.0);
        match pas_from_counts(self.n_all, self.n_in_up, self.windows) {
            Ok(p) if self.n_all > 0 => Objectives {
                cmae_norm: cmae,
                pas_not_up_norm: p.pas_not_up / 100.0,
                pas_in_up_norm: p.pas_in_up / 100.0,
            },
            _ => Objectives::NO_TRIGGERS,
        }
    }
}

impl Add for TriggerStats {
    type Output = Self;

    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl AddAssign for TriggerStats {
    fn add_assign(&mut self, o: Self) {
        self.sum_cos += o.sum_cos;
        self.sum_sin += o.sum_sin;
        self.n_all += o.n_all;
        self.n_in_up += o.n_in_up;
        self.windows += o.windows;
    }
}

/// The three optimization objectives, each in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objectives {
    pub cmae_norm: f64,
    pub pas_not_up_norm: f64,
    pub pas_in_up_norm: f64,
}

impl Objectives {
    pub const NO_TRIGGERS: Objectives = Objectives {
        cmae_norm: 1.0,
        pas_not_up_norm: 0.0,
        pas_in_up_norm: 0.0,
    };

    /// True when `self` is strictly better than `other` in all three.
    pub fn strictly_dominates(&self, other: &Objectives) -> bool {
        self.cmae_norm < other.cmae_norm
            && self.pas_not_up_norm < other.pas_not_up_norm
            && self.pas_in_up_norm > other.pas_in_up_norm
    }
}

/// Full evaluation of one trigger log.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub algorithm: Option<Algorithm>,
    pub candidates: usize,
    pub delivered: usize,
    /// Indexed in the order nrem, swa, beta, onoff.
    pub suppressed: [usize; 4],
    pub scored: usize,
    pub delivered_outside_windows: usize,
    pub circular: Option<CircularSummary>,
    pub undefined_mean: bool,
    pub cmae45: Option<(f64, f64)>,
    pub pas: Option<PasReport>,
    pub qualifying_windows: usize,
    pub scored_nrem_windows: usize,
    pub targeting: TargetingCapacity,
    pub intervals: Option<IntervalStats>,
    pub histogram: [usize; HISTOGRAM_BINS],
    /// Ground-truth phases of the scored triggers.
    pub phases_deg: Vec<f64>,
    /// All candidates inside scored NREM and the oracle region, gate ignored.
    pub candidate_phases_deg: Vec<f64>,
    pub candidate_circular: Option<CircularSummary>,
    pub candidate_cmae45: Option<(f64, f64)>,
}

impl MetricsReport {
    pub fn up_fraction(&self) -> Option<f64> {
        self.pas
            .filter(|p| p.n_all > 0)
            .map(|p| p.n_in_up as f64 / p.n_all as f64)
    }

    pub fn objectives(&self) -> Objectives {
        match (self.pas, self.cmae45) {
            (Some(p), cm) if p.n_all > 0 => Objectives {
                cmae_norm: cm.map_or(1.0, |c| c.0),
                pas_not_up_norm: p.pas_not_up / 100.0,
                pas_in_up_norm: p.pas_in_up / 100.0,
            },
            _ => Objectives::NO_TRIGGERS,
        }
    }
}

fn reason_slot(r: SuppressionReason) -> usize {
    match r {
        SuppressionReason::Nrem => 0,
        SuppressionReason::Swa => 1,
        SuppressionReason::Beta => 2,
        SuppressionReason::OnOff => 3,
    }
}

pub fn evaluate(prep: &PreparedRecording, log: &[LoggedTrigger]) -> MetricsReport {
    let mut suppressed = [0; 4];
    let mut delivered = Vec::new();
    for t in log {
        match t.decision.reason() {
            Some(r) => suppressed[reason_slot(r)] += 1,
            None => delivered.push(t),
        }
    }
    let mut scored_idx = Vec::new();
    let mut phases = Vec::new();
    for t in &delivered {
        let i = t.sample_index as usize;
        if prep.window_mask.get(i).copied().unwrap_or(false) {
            scored_idx.push(t.sample_index);
            phases.push(prep.truth.track.phase_deg[i]);
        }
    }
    let (c, s) = crate::metrics::unit_sums(&phases);
    let circ = circular_from_sums(c, s, phases.len());
    let circular = circ.as_ref().ok().copied();
    let up = phases.iter().filter(|&&p| in_up_phase(p)).count();
    let pas = pas_from_counts(phases.len(), up, prep.windows).ok();
    let mut delivered_idx: Vec<u64> = delivered.iter().map(|t| t.sample_index).collect();
    delivered_idx.sort_unstable();
    let times: Vec<f64> = delivered.iter().map(|t| t.time_s).collect();
    let candidate_phases: Vec<f64> = log
        .iter()
        .map(|t| t.sample_index as usize)
        .filter(|&i| prep.nrem_valid_mask.get(i).copied().unwrap_or(false))
        .map(|i| prep.truth.track.phase_deg[i])
        .collect();
    let (cc, cs) = crate::metrics::unit_sums(&candidate_phases);
    let candidate_circular = circular_from_sums(cc, cs, candidate_phases.len()).ok();
    MetricsReport {
        algorithm: log.first().map(|t| t.algorithm),
        candidates: log.len(),
        delivered: delivered.len(),
        suppressed,
        scored: phases.len(),
        delivered_outside_windows: delivered.len() - phases.len(),
        circular,
        undefined_mean: circular.is_none(),
        cmae45: circular.map(|c| cmae45_of_mean(c.mean_deg)),
        pas,
        qualifying_windows: prep.windows,
        scored_nrem_windows: prep.scored_nrem_windows,
        targeting: targeting_capacity(&prep.waves, &delivered_idx, &phases),
        intervals: trigger_intervals(&times),
        histogram: circular_histogram(&phases),
        phases_deg: phases,
        candidate_cmae45: candidate_circular.map(|c| cmae45_of_mean(c.mean_deg)),
        candidate_circular,
        candidate_phases_deg: candidate_phases,
    }
}
