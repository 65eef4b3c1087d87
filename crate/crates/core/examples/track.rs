//! Runs the three trackers over a clean 1 Hz sinusoid and prints trigger
//! counts, median inter-trigger interval and the phase at which each fired.

use swphase::metrics::{circular_mean_sd, trigger_intervals};
use swphase::pipeline::{run_pipeline, PipelineConfig};
use swphase::synth::{generate, SynthSpec};
use swphase::trackers::{Algorithm, TrackerConfig};

fn main() -> swphase::Result<()> {
    let sine = generate(&SynthSpec::pure_sinusoid(1.0, 75.0, 13.0))?;
    let rec = &sine.recording;
    for alg in Algorithm::ALL {
        let mut cfg = PipelineConfig {
            tracker: TrackerConfig::with_algorithm(alg),
            ..PipelineConfig::default()
        };
        cfg.tracker.at_threshold = 20.0;
        let log = run_pipeline(rec.samples.iter().copied(), rec.fs, &cfg)?;
        let times: Vec<f64> = log.iter().filter(|t| t.time_s > 60.0).map(|t| t.time_s).collect();
        let truth: Vec<f64> = log
            .iter()
            .filter(|t| t.time_s > 60.0)
            .map(|t| sine.true_phase_deg[t.sample_index as usize])
            .collect();
        let iv = trigger_intervals(&times).map_or(f64::NAN, |i| i.median_s);
        let mean = circular_mean_sd(&truth).map_or(f64::NAN, |c| c.mean_deg);
        println!(
            "{alg:>3}: {:4} triggers, median interval {iv:.3} s, mean true phase {mean:6.1} deg",
            log.len()
        );
    }
    Ok(())
}
