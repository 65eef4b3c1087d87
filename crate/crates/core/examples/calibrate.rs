//! Derives gate thresholds from synthetic NREM and non-NREM material.

use swphase::gate::calibrate;
use swphase::synth::SynthSpec;

fn main() -> swphase::Result<()> {
    let c = calibrate(&SynthSpec::default())?;
    println!("band        nrem median   other median");
    for (name, a, b) in [
        ("0.5-2 Hz", c.nrem.nrem_low, c.other.nrem_low),
        ("2-4 Hz", c.nrem.nrem_high, c.other.nrem_high),
        ("20-30 Hz", c.nrem.nrem_beta, c.other.nrem_beta),
        ("0.5-4 Hz", c.nrem.swa, c.other.swa),
        ("17-22 Hz", c.nrem.beta, c.other.beta),
    ] {
        println!("{name:<10} {a:13.2} {b:14.2}");
    }
    println!("{:#?}", c.config);
    Ok(())
}
