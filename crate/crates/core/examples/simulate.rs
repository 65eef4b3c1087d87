//! Generates a synthetic sleep episode and writes it, with its hypnogram and
//! generator phase, to the system temp directory.

use swphase::cli::cmd_simulate;
use swphase::io::Settings;

fn main() -> swphase::Result<()> {
    let settings = Settings::default();
    let out = std::env::temp_dir().join("swphase-episode.bin");
    let paths = cmd_simulate(&settings, &out)?;
    println!("recording  {}", paths.recording.display());
    println!("truth      {}", paths.truth.display());
    println!("hypnogram  {}", paths.hypnogram.display());
    Ok(())
}
