//! Per-sample cost and real-time cost ratio of each tracker at 250 Hz.

use swphase::bench::{measure, BenchOptions};
use swphase::pipeline::PipelineConfig;
use swphase::synth::{generate, SynthSpec};
use swphase::trackers::{Algorithm, TrackerConfig};

fn main() -> swphase::Result<()> {
    let rec = generate(&SynthSpec::default())?.recording;
    let opts = BenchOptions::default();
    for alg in Algorithm::ALL {
        let cfg = PipelineConfig {
            tracker: TrackerConfig::with_algorithm(alg),
            ..PipelineConfig::default()
        };
        let r = measure(&cfg, &rec.samples, rec.fs, &opts)?;
        println!(
            "{alg:>3}: median {:7.1} ns/sample (IQR {:.1}-{:.1}), rcr {:.2e}, {} ops/step",
            r.median_ns,
            r.q1_ns,
            r.q3_ns,
            r.rcr,
            r.ops.total()
        );
    }
    Ok(())
}
