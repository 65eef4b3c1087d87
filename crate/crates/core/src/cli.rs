//! Command implementations behind the `swphase` binary.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bench::{measure, CostReport};
use crate::error::Result;
use crate::evaluation::{evaluate, MetricsReport, PreparedRecording};
use crate::gate::{calibrate, Calibration};
use crate::io::{
    create_file, load_recording, open_file, open_samples, read_hypnogram, read_manifest, read_trigger_log, sha256_file,
    write_cost_report, write_cv_outcomes, write_histogram_csv, write_hypnogram, write_intervals_csv,
    write_metrics_report, write_recording_binary, write_timing_csv, write_trigger_log, Provenance, SampleSource,
    Settings,
};
use crate::optimizer::{grid_search_cv, CvResult, TrackerEvaluator};
use crate::pipeline::{LoggedTrigger, Pipeline, PipelineConfig};
use crate::recording::EegRecording;
use crate::synth::generate;

fn provenance(settings: &Settings, inputs: &[&Path]) -> Result<Provenance> {
    let mut p = Provenance::default();
    for path in inputs {
        p = p.with_input(path.display().to_string(), sha256_file(path)?);
    }
    Ok(p.with_config(&settings.to_kv()))
}

/// Paths written by [`cmd_simulate`].
#[derive(Clone, Debug, PartialEq)]
pub struct SimulateOutputs {
    pub recording: PathBuf,
    /// `sample,true_phase_deg` rows for every sample inside NREM.
    pub truth: PathBuf,
    pub hypnogram: PathBuf,
}

impl SimulateOutputs {
    /// `rec.bin` gives `rec.truth.csv` and `rec.hyp.csv` alongside.
    pub fn beside(recording: &Path) -> Self {
        let stem = recording
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let dir = recording.parent().unwrap_or(Path::new(""));
        Self {
            recording: recording.to_path_buf(),
            truth: dir.join(format!("{stem}.truth.csv")),
            hypnogram: dir.join(format!("{stem}.hyp.csv")),
        }
    }
}

pub fn cmd_simulate(settings: &Settings, out: &Path) -> Result<SimulateOutputs> {
    let o = generate(&settings.synth)?;
    let paths = SimulateOutputs::beside(out);
    let prov = provenance(settings, &[])?;
    write_recording_binary(create_file(&paths.recording)?, &o.recording, &prov.compact())?;
    let mut w = BufWriter::new(create_file(&paths.truth)?);
    w.write_all(prov.header().as_bytes())?;
    writeln!(w, "sample,true_phase_deg")?;
    for (i, p) in o.true_phase_deg.iter().enumerate().filter(|(_, p)| p.is_finite()) {
        writeln!(w, "{i},{p}")?;
    }
    w.flush()?;
    write_hypnogram(create_file(&paths.hypnogram)?, &o.hypnogram)?;
    Ok(paths)
}

/// Streams samples through the pipeline as they are read.
pub fn track_stream(src: SampleSource, cfg: &PipelineConfig) -> Result<Vec<LoggedTrigger>> {
    let mut p = Pipeline::new(cfg, src.fs())?;
    let mut log = Vec::new();
    for x in src {
        if let Some(t) = p.step(x?)?.logged {
            log.push(t);
        }
    }
    Ok(log)
}

pub fn cmd_track(
    recording: &Path,
    settings: &Settings,
    fs_hint: Option<f64>,
    out: &Path,
) -> Result<Vec<LoggedTrigger>> {
    let log = track_stream(open_samples(recording, fs_hint)?, &settings.pipeline())?;
    write_trigger_log(create_file(out)?, &log, &provenance(settings, &[recording])?)?;
    Ok(log)
}

fn load_with_hypnogram(recording: &Path, hypnogram: Option<&Path>, fs_hint: Option<f64>) -> Result<EegRecording> {
    let mut rec = load_recording(recording, fs_hint)?;
    if let Some(h) = hypnogram {
        rec.hypnogram = Some(read_hypnogram(open_file(h)?, &h.display().to_string())?);
    }
    Ok(rec)
}

/// Output paths of [`cmd_evaluate`]; `None` skips a file.
#[derive(Clone, Debug, Default)]
pub struct EvaluateOutputs {
    pub report: Option<PathBuf>,
    pub histogram: Option<PathBuf>,
    pub intervals: Option<PathBuf>,
}

pub fn cmd_evaluate(
    recording: &Path,
    log: &Path,
    hypnogram: Option<&Path>,
    settings: &Settings,
    fs_hint: Option<f64>,
    out: &EvaluateOutputs,
) -> Result<MetricsReport> {
    let rec = load_with_hypnogram(recording, hypnogram, fs_hint)?;
    let triggers = read_trigger_log(open_file(log)?, &log.display().to_string())?;
    let prep = PreparedRecording::prepare(&rec, &settings.eval())?;
    let m = evaluate(&prep, &triggers);
    let mut inputs = vec![recording, log];
    inputs.extend(hypnogram);
    if let Some(p) = &out.report {
        write_metrics_report(create_file(p)?, &m, &provenance(settings, &inputs)?)?;
    }
    if let Some(p) = &out.histogram {
        write_histogram_csv(create_file(p)?, &m)?;
    }
    if let Some(p) = &out.intervals {
        write_intervals_csv(create_file(p)?, &m)?;
    }
    Ok(m)
}

/// Grid search over every recording listed in `manifest`. Writes the full
/// outcome table and a configuration file holding the selected combo.
pub fn cmd_optimize(
    manifest: &Path,
    settings: &Settings,
    fs_hint: Option<f64>,
    outcomes: &Path,
    selected: &Path,
) -> Result<CvResult> {
    let entries = read_manifest(manifest)?;
    let eval_cfg = settings.eval();
    let prepared: Vec<PreparedRecording> = entries
        .par_iter()
        .map(|e| {
            let rec = load_with_hypnogram(&e.recording, e.hypnogram.as_deref(), fs_hint)?;
            PreparedRecording::prepare(&rec, &eval_cfg)
        })
        .collect::<Result<_>>()?;
    let combos = settings.grid_or_default().combos()?;
    let cv = grid_search_cv(
        &TrackerEvaluator { recordings: &prepared },
        &combos,
        settings.cv_folds,
        settings.cv_seed,
    )?;
    let prov = provenance(settings, &[manifest])?;
    write_cv_outcomes(create_file(outcomes)?, &cv, &prov)?;
    let chosen = Settings {
        tracker: cv.selected_config().clone(),
        grid: None,
        ..settings.clone()
    };
    std::fs::write(selected, format!("{}{}", prov.header(), chosen.to_kv()))?;
    Ok(cv)
}

pub fn cmd_bench(
    recording: &Path,
    settings: &Settings,
    fs_hint: Option<f64>,
    out: Option<&Path>,
    timing: Option<&Path>,
) -> Result<CostReport> {
    let rec = load_recording(recording, fs_hint)?;
    let r = measure(&settings.pipeline(), &rec.samples, rec.fs, &settings.bench)?;
    if let Some(p) = out {
        write_cost_report(create_file(p)?, &r, &provenance(settings, &[recording])?)?;
    }
    if let Some(p) = timing {
        write_timing_csv(create_file(p)?, &r)?;
    }
    Ok(r)
}

/// Gate thresholds from synthetic NREM and non-NREM material generated
/// with the configured spec; writes the settings with those thresholds.
pub fn cmd_calibrate(settings: &Settings, out: &Path) -> Result<Calibration> {
    let c = calibrate(&settings.synth)?;
    let updated = Settings {
        gate: c.config.clone(),
        ..settings.clone()
    };
    let prov = provenance(settings, &[])?;
    std::fs::write(out, format!("{}{}", prov.header(), updated.to_kv()))?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::{Hypnogram, Stage};
    use crate::synth::SynthSpec;

    #[test]
    fn simulate_track_evaluate_pure_sinusoid() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Settings::default();
        s.synth = SynthSpec::pure_sinusoid(1.0, 75.0, 12.0);
        let paths = cmd_simulate(&s, &dir.path().join("sine.bin")).unwrap();
        let truth = std::fs::read_to_string(&paths.truth).unwrap();
        assert!(truth.lines().any(|l| l == "sample,true_phase_deg"));
        let log_path = dir.path().join("log.csv");
        let log = cmd_track(&paths.recording, &s, None, &log_path).unwrap();
        assert!(!log.is_empty());
        let out = EvaluateOutputs {
            report: Some(dir.path().join("report.txt")),
            histogram: Some(dir.path().join("hist.csv")),
            intervals: Some(dir.path().join("iv.csv")),
        };
        let m = cmd_evaluate(&paths.recording, &log_path, Some(&paths.hypnogram), &s, None, &out).unwrap();
        assert!(m.candidate_cmae45.is_some());
        let text = std::fs::read_to_string(out.report.unwrap()).unwrap();
        assert!(text.contains("candidate.cmae45_norm = 0."));
        assert_eq!(
            std::fs::read_to_string(out.histogram.unwrap()).unwrap().lines().count(),
            37
        );
    }

    #[test]
    fn calibrate_writes_loadable_settings() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gate.cfg");
        let s = Settings {
            synth: SynthSpec {
                hypnogram: Hypnogram::from_runs(&[(Stage::N3, 12.0)]),
                ..SynthSpec::default()
            },
            ..Settings::default()
        };
        let c = cmd_calibrate(&s, &p).unwrap();
        assert_eq!(Settings::load(&p).unwrap().gate, c.config);
    }
}
