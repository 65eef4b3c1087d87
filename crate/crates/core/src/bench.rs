//! Per-sample wall-clock cost of the full streaming chain.

use std::hint::black_box;
use std::time::{Duration, Instant};

use crate::error::{invalid, Error, Result};
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::trackers::{Algorithm, OpCount, PhaseTracker, TrackerStep};

pub const MIN_WARMUP: usize = 1000;
pub const MIN_REPETITIONS: usize = 3;
/// Coarsest acceptable timer granularity.
pub const MAX_TIMER_RESOLUTION_NS: u64 = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOptions {
    pub repetitions: usize,
    pub warmup: usize,
    /// Samples timed together; per-sample cost is the batch time divided by this.
    pub batch: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            repetitions: 5,
            warmup: 2500,
            batch: 32,
        }
    }
}

impl BenchOptions {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < MIN_REPETITIONS {
            return Err(invalid("repetitions", format!("need at least {MIN_REPETITIONS}")));
        }
        if self.warmup < MIN_WARMUP {
            return Err(invalid("warmup", format!("need at least {MIN_WARMUP} samples")));
        }
        if self.batch == 0 {
            return Err(invalid("batch", "must be positive"));
        }
        Ok(())
    }
}

/// Quartiles of one timed repetition, in ns per sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub median_ns: f64,
    pub q1_ns: f64,
    pub q3_ns: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub label: String,
    pub fs: f64,
    pub batch: usize,
    pub median_ns: f64,
    pub q1_ns: f64,
    pub q3_ns: f64,
    /// Median cost over the sample period.
    pub rcr: f64,
    pub efficiency: f64,
    pub ops: OpCount,
    pub timer_resolution_ns: u64,
    /// Every repetition; the reported quartiles come from the fastest.
    pub runs: Vec<RunSummary>,
    /// Per-sample cost of every batch in the fastest repetition.
    pub samples_ns: Vec<f64>,
}

/// Smallest observable nonzero step of the monotonic clock.
pub fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..200 {
        let t0 = Instant::now();
        let mut t1 = Instant::now();
        while t1 == t0 {
            t1 = Instant::now();
        }
        best = best.min(t1 - t0);
    }
    best
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Times `make()`-built pipelines over `samples` and keeps the fastest
/// repetition. The input is cycled when shorter than warm-up plus one batch.
pub fn measure_with<F>(label: &str, mut make: F, samples: &[f64], fs: f64, opts: &BenchOptions) -> Result<CostReport>
where
    F: FnMut() -> Result<Pipeline>,
{
    opts.validate()?;
    if samples.is_empty() {
        return Err(Error::InsufficientData("empty recording".into()));
    }
    let resolution = timer_resolution().as_nanos() as u64;
    if resolution > MAX_TIMER_RESOLUTION_NS {
        return Err(Error::TimerResolution {
            resolution_ns: resolution,
        });
    }
    let timed = samples.len().max(opts.batch);
    let batches = timed / opts.batch;
    let mut runs = Vec::with_capacity(opts.repetitions);
    let mut best: Option<(RunSummary, Vec<f64>)> = None;
    let mut ops = OpCount::default();
    for _ in 0..opts.repetitions {
        let mut p = make()?;
        ops = p.tracker().op_count();
        let mut it = samples.iter().copied().cycle();
        for _ in 0..opts.warmup {
            black_box(p.step(it.next().unwrap_or(0.0))?);
        }
        let mut per_sample = Vec::with_capacity(batches);
        let mut buf = vec![0.0; opts.batch];
        for _ in 0..batches {
            for slot in buf.iter_mut() {
                *slot = it.next().unwrap_or(0.0);
            }
            let t0 = Instant::now();
            for &x in &buf {
                black_box(p.step(black_box(x))?);
            }
            per_sample.push(t0.elapsed().as_nanos() as f64 / opts.batch as f64);
        }
        let mut sorted = per_sample.clone();
        sorted.sort_by(f64::total_cmp);
        let run = RunSummary {
            median_ns: quantile(&sorted, 0.5),
            q1_ns: quantile(&sorted, 0.25),
            q3_ns: quantile(&sorted, 0.75),
        };
        runs.push(run);
        if best.as_ref().is_none_or(|(b, _)| run.median_ns < b.median_ns) {
            best = Some((run, per_sample));
        }
    }
    let (run, samples_ns) = best.expect("at least one repetition");
    let period_ns = 1e9 / fs;
    let rcr = run.median_ns / period_ns;
    Ok(CostReport {
        label: label.to_string(),
        fs,
        batch: opts.batch,
        median_ns: run.median_ns,
        q1_ns: run.q1_ns,
        q3_ns: run.q3_ns,
        rcr,
        efficiency: 100.0 * (1.0 - rcr),
        ops,
        timer_resolution_ns: resolution,
        runs,
        samples_ns,
    })
}

/// Cost of the configured preprocess, tracker and gate chain.
pub fn measure(cfg: &PipelineConfig, samples: &[f64], fs: f64, opts: &BenchOptions) -> Result<CostReport> {
    let label = format!("{}", cfg.tracker.algorithm);
    measure_with(&label, || Pipeline::new(cfg, fs), samples, fs, opts)
}

/// Tracker that does nothing.
#[derive(Clone, Debug, Default)]
pub struct NoopTracker;

impl PhaseTracker for NoopTracker {
    fn algorithm(&self) -> Algorithm {
        Algorithm::At
    }

    fn step(&mut self, _sample: f64) -> TrackerStep {
        TrackerStep::default()
    }

    fn reset(&mut self) {}

    fn op_count(&self) -> OpCount {
        OpCount::default()
    }
}

/// Tracker that spins for a fixed time on every sample.
#[derive(Clone, Debug)]
pub struct BusyTracker {
    pub spin: Duration,
}

impl PhaseTracker for BusyTracker {
    fn algorithm(&self) -> Algorithm {
        Algorithm::At
    }

    fn step(&mut self, _sample: f64) -> TrackerStep {
        let t0 = Instant::now();
        while t0.elapsed() < self.spin {
            std::hint::spin_loop();
        }
        TrackerStep::default()
    }

    fn reset(&mut self) {}

    fn op_count(&self) -> OpCount {
        OpCount::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub(tracker: impl PhaseTracker + Clone + 'static, fs: f64, opts: &BenchOptions) -> CostReport {
        let cfg = PipelineConfig::default();
        let xs = vec![1.0; 64];
        measure_with(
            "stub",
            || Pipeline::with_tracker(&cfg, fs, Box::new(tracker.clone())),
            &xs,
            fs,
            opts,
        )
        .unwrap()
    }

    #[test]
    fn noop_is_nearly_free() {
        let r = stub(NoopTracker, 250.0, &BenchOptions::default());
        assert!(r.rcr < 0.01, "rcr {}", r.rcr);
        assert!(r.efficiency > 99.0);
        assert!(r.q1_ns <= r.median_ns && r.median_ns <= r.q3_ns);
        assert_eq!(r.runs.len(), 5);
    }

    #[test]
    fn busy_tracker_fills_the_budget() {
        // 0.4 ms spin at 2.5 kHz is the same budget ratio as 4 ms at 250 Hz
        let opts = BenchOptions {
            repetitions: 3,
            warmup: 1000,
            batch: 4,
        };
        let r = stub(
            BusyTracker {
                spin: Duration::from_micros(400),
            },
            2500.0,
            &opts,
        );
        assert!((r.rcr - 1.0).abs() < 0.1, "rcr {}", r.rcr);
        assert!(r.efficiency.abs() < 10.0);
    }

    #[test]
    fn options_validated() {
        let xs = [0.0; 10];
        let cfg = PipelineConfig::default();
        for bad in [
            BenchOptions {
                repetitions: 2,
                ..BenchOptions::default()
            },
            BenchOptions {
                warmup: 999,
                ..BenchOptions::default()
            },
            BenchOptions {
                batch: 0,
                ..BenchOptions::default()
            },
        ] {
            assert!(measure(&cfg, &xs, 250.0, &bad).is_err());
        }
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
    }
}
