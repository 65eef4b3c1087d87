use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swphase::cli::{self, EvaluateOutputs};
use swphase::io::Settings;
use swphase::Result;

#[derive(Parser)]
#[command(name = "swphase", version, about = "Slow-wave phase tracking toolkit")]
struct Cli {
    /// Flat key-value configuration; defaults apply to missing keys.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Sampling rate for CSV recordings without an `# fs=` line.
    #[arg(long, global = true)]
    fs: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recording, true-phase sidecar and hypnogram.
    Simulate {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Stream a recording through preprocess, tracker and gate.
    Track {
        recording: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score a trigger log against the offline ground truth.
    Evaluate {
        recording: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        hypnogram: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long)]
        intervals: Option<PathBuf>,
    },
    /// Cross-validated grid search over a recording manifest.
    Optimize {
        manifest: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long)]
        selected: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-sample cost of the configured chain.
    Bench {
        recording: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: Option<PathBuf>,
    },
    /// Derive gate thresholds from synthetic sleep material.
    Calibrate {
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn run(args: Cli) -> Result<()> {
    let mut s = match &args.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let fs = args.fs;
    match args.command {
        Command::Simulate { out, seed } => {
            if let Some(seed) = seed {
                s.synth.seed = seed;
            }
            let p = cli::cmd_simulate(&s, &out)?;
            println!("recording {}", p.recording.display());
            println!("truth {}", p.truth.display());
            println!("hypnogram {}", p.hypnogram.display());
        }
        Command::Track { recording, out } => {
            let log = cli::cmd_track(&recording, &s, fs, &out)?;
            let delivered = log.iter().filter(|t| t.delivered()).count();
            println!("candidates {} delivered {delivered}", log.len());
        }
        Command::Evaluate {
            recording,
            log,
            hypnogram,
            out,
            histogram,
            intervals,
        } => {
            let outs = EvaluateOutputs {
                report: out,
                histogram,
                intervals,
            };
            let m = cli::cmd_evaluate(&recording, &log, hypnogram.as_deref(), &s, fs, &outs)?;
            let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
            println!("scored {} of {} delivered", m.scored, m.delivered);
            println!("cmae45 {}", fmt(m.cmae45.map(|c| c.0)));
            println!("candidate_cmae45 {}", fmt(m.candidate_cmae45.map(|c| c.0)));
            println!("up_fraction {}", fmt(m.up_fraction()));
        }
        Command::Optimize {
            manifest,
            outcomes,
            selected,
            k,
            seed,
        } => {
            if let Some(k) = k {
                s.cv_folds = k;
            }
            if let Some(seed) = seed {
                s.cv_seed = seed;
            }
            let cv = cli::cmd_optimize(&manifest, &s, fs, &outcomes, &selected)?;
            let o = cv.selected_outcome();
            println!(
                "selected {} phi_t {} k_pll {} k_pv {} fs_span {} at_threshold {} ed_error {:.4}",
                o.config.algorithm,
                o.config.phi_t,
                o.config.k_pll,
                o.config.k_pv,
                o.config.fs_span,
                o.config.at_threshold,
                o.ed_error
            );
        }
        Command::Bench { recording, out, timing } => {
            let r = cli::cmd_bench(&recording, &s, fs, out.as_deref(), timing.as_deref())?;
            println!(
                "{} median {:.1} ns q1 {:.1} q3 {:.1} rcr {:.3e} efficiency {:.4}",
                r.label, r.median_ns, r.q1_ns, r.q3_ns, r.rcr, r.efficiency
            );
        }
        Command::Calibrate { out } => {
            let c = cli::cmd_calibrate(&s, &out)?;
            let g = &c.config;
            println!(
                "nrem_low {} nrem_high {} nrem_beta {} swa {} beta {} -> {}",
                g.nrem_low_threshold,
                g.nrem_high_threshold,
                g.nrem_beta_threshold,
                g.swa_threshold,
                g.beta_threshold,
                Path::new(&out).display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::from(2)
        }
    }
}
