//! Gate flags across a synthetic episode, summarised per sleep stage.

use std::collections::BTreeMap;

use swphase::dsp::{PreprocessConfig, Preprocessor};
use swphase::gate::{GateConfig, GateTimeline};
use swphase::synth::{generate, SynthSpec};

fn main() -> swphase::Result<()> {
    let out = generate(&SynthSpec::default())?;
    let fs = out.recording.fs;
    let xs = Preprocessor::new(fs, &PreprocessConfig::default())?.run(&out.recording.samples)?;
    let tl = GateTimeline::compute(&xs, fs, &GateConfig::default())?;
    let mut per_stage: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (w, flags) in tl.flags.iter().enumerate() {
        let t = (w * tl.step) as f64 / fs;
        let Some(stage) = out.hypnogram.stage_at(t) else {
            continue;
        };
        let e = per_stage.entry(stage.as_str()).or_default();
        e.0 += 1;
        e.1 += flags.qualifying() as usize;
        e.2 += flags.beta_inhibit as usize;
    }
    println!("stage  windows  qualifying  beta-inhibited");
    for (stage, (n, q, b)) in per_stage {
        println!("{stage:<6} {n:7} {q:11} {b:15}");
    }
    Ok(())
}
