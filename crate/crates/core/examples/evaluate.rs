//! Tracks a noisy synthetic episode and scores the trigger log against the
//! offline phase estimate.

use swphase::evaluation::{evaluate, EvalConfig, PreparedRecording};
use swphase::pipeline::{run_pipeline, PipelineConfig};
use swphase::synth::{generate, SynthSpec};
use swphase::trackers::{Algorithm, TrackerConfig};

fn main() -> swphase::Result<()> {
    let out = generate(&SynthSpec {
        seed: 7,
        ..SynthSpec::default()
    })?;
    let rec = out.recording.with_hypnogram(out.hypnogram);
    let prep = PreparedRecording::prepare(&rec, &EvalConfig::default())?;
    println!("qualifying windows: {}", prep.windows);
    for alg in Algorithm::ALL {
        let cfg = PipelineConfig {
            tracker: TrackerConfig::with_algorithm(alg),
            ..PipelineConfig::default()
        };
        let log = run_pipeline(rec.samples.iter().copied(), rec.fs, &cfg)?;
        let m = evaluate(&prep, &log);
        let cmae = m.cmae45.map_or("undefined".to_string(), |c| format!("{:.3}", c.0));
        let pas = m.pas.map_or(0.0, |p| p.pas_in_up);
        println!(
            "{alg:>3}: delivered {:4}/{:4}, scored {:4}, cmae45 {cmae}, PAS in-up {pas:.1}%, low-wave targeting {:.1}%",
            m.delivered, m.candidates, m.scored, m.targeting.low_pct
        );
    }
    Ok(())
}
