//! Compares the zero-phase band-pass plus Hilbert phase with the generator
//! phase of a synthetic recording, then sweeps filter order and stopband
//! attenuation to show how much the oracle choice moves the PV score.

use swphase::angle::diff_deg;
use swphase::dsp::SampleStream;
use swphase::evaluation::{evaluate, EvalConfig, PreparedRecording};
use swphase::oracle::{ground_truth, OracleConfig};
use swphase::pipeline::{run_pipeline, PipelineConfig};
use swphase::recording::{Hypnogram, Stage};
use swphase::synth::{generate, SynthSpec};

fn main() -> swphase::Result<()> {
    let out = generate(&SynthSpec {
        hypnogram: Hypnogram::from_runs(&[(Stage::N2, 4.0), (Stage::N3, 20.0)]),
        ..SynthSpec::default()
    })?;
    let stream = SampleStream::new(out.recording.samples.clone(), out.recording.fs)?;
    let rec = out.recording.clone().with_hypnogram(out.hypnogram.clone());
    let log = run_pipeline(rec.samples.iter().copied(), rec.fs, &PipelineConfig::default())?;

    println!("order  stopband  RMS vs generator  PV cmae45");
    for order in [2, 4, 6, 8] {
        for stopband_db in [20.0, 40.0, 60.0] {
            let oracle = OracleConfig {
                order,
                stopband_db,
                ..OracleConfig::default()
            };
            let gt = ground_truth(&stream, &oracle)?;
            let errs: Vec<f64> = gt
                .track
                .valid
                .clone()
                .filter(|&i| out.true_phase_deg[i].is_finite())
                .map(|i| diff_deg(gt.track.phase_deg[i], out.true_phase_deg[i]))
                .collect();
            let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
            let prep = PreparedRecording::prepare(
                &rec,
                &EvalConfig {
                    oracle,
                    ..EvalConfig::default()
                },
            )?;
            let cmae = evaluate(&prep, &log).cmae45.map_or(f64::NAN, |c| c.0);
            println!("{order:5}  {stopband_db:5.0} dB  {rms:13.2} deg  {cmae:9.4}");
        }
    }
    Ok(())
}
