use std::fs::File;
use std::path::Path;

use swphase::cli::{cmd_evaluate, cmd_optimize, cmd_simulate, cmd_track, EvaluateOutputs};
use swphase::io::{
    load_recording, read_trigger_log, write_recording_binary, write_recording_csv, write_trigger_log, Provenance,
    Settings,
};
use swphase::optimizer::ParamGrid;
use swphase::recording::{Hypnogram, Stage};
use swphase::synth::SynthSpec;
use swphase::trackers::Algorithm;
use swphase::Error;

fn settings(alg: Algorithm, minutes: f64, seed: u64) -> Settings {
    let mut s = Settings::default();
    s.tracker.algorithm = alg;
    s.synth = SynthSpec {
        hypnogram: Hypnogram::from_runs(&[(Stage::N2, 2.0), (Stage::N3, minutes - 2.0)]),
        seed,
        ..SynthSpec::default()
    };
    s
}

fn csv_copy(bin: &Path, csv: &Path) {
    let rec = load_recording(bin, None).unwrap();
    write_recording_csv(File::create(csv).unwrap(), &rec, "").unwrap();
}

#[test]
fn csv_and_binary_recordings_give_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    for alg in Algorithm::ALL {
        let s = settings(alg, 12.0, 3);
        let sim = cmd_simulate(&s, &dir.path().join("r.bin")).unwrap();
        let csv = dir.path().join("r.csv");
        csv_copy(&sim.recording, &csv);
        let a = cmd_track(&sim.recording, &s, None, &dir.path().join("a.csv")).unwrap();
        let b = cmd_track(&csv, &s, None, &dir.path().join("b.csv")).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{alg}");
    }
}

#[test]
fn truncated_stream_yields_log_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let s = settings(Algorithm::Pv, 12.0, 5);
    let sim = cmd_simulate(&s, &dir.path().join("r.bin")).unwrap();
    let full = cmd_track(&sim.recording, &s, None, &dir.path().join("full.csv")).unwrap();
    let mut rec = load_recording(&sim.recording, None).unwrap();
    let cut = rec.samples.len() * 2 / 3;
    rec.samples.truncate(cut);
    let short_path = dir.path().join("short.bin");
    write_recording_binary(File::create(&short_path).unwrap(), &rec, "").unwrap();
    let short = cmd_track(&short_path, &s, None, &dir.path().join("short.csv")).unwrap();
    let expected: Vec<_> = full.into_iter().filter(|t| (t.sample_index as usize) < cut).collect();
    assert_eq!(short, expected);
}

#[test]
fn truncated_binary_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = settings(Algorithm::Pll, 12.0, 6);
    let sim = cmd_simulate(&s, &dir.path().join("r.bin")).unwrap();
    let bytes = std::fs::read(&sim.recording).unwrap();
    let cut = dir.path().join("cut.bin");
    std::fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
    let err = cmd_track(&cut, &s, None, &dir.path().join("log.csv")).unwrap_err();
    assert!(err.to_string().contains("byte"), "{err}");
}

#[test]
fn trigger_log_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let s = settings(Algorithm::Pll, 12.0, 7);
    let sim = cmd_simulate(&s, &dir.path().join("r.bin")).unwrap();
    let path = dir.path().join("log.csv");
    let log = cmd_track(&sim.recording, &s, None, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# format trigger-log 1"));
    assert_eq!(read_trigger_log(File::open(&path).unwrap(), "log").unwrap(), log);
}

#[test]
fn empty_log_evaluates_to_zero_scores() {
    let dir = tempfile::tempdir().unwrap();
    let s = settings(Algorithm::Pv, 12.0, 8);
    let sim = cmd_simulate(&s, &dir.path().join("r.bin")).unwrap();
    let log = dir.path().join("empty.csv");
    write_trigger_log(File::create(&log).unwrap(), &[], &Provenance::default()).unwrap();
    let out = EvaluateOutputs {
        report: Some(dir.path().join("m.txt")),
        ..EvaluateOutputs::default()
    };
    let m = cmd_evaluate(&sim.recording, &log, Some(&sim.hypnogram), &s, None, &out).unwrap();
    assert_eq!(m.candidates, 0);
    assert!(m.undefined_mean && m.cmae45.is_none());
    let p = m.pas.unwrap();
    assert_eq!((p.pas_all, p.pas_in_up, p.pas_not_up), (0.0, 0.0, 0.0));
    let text = std::fs::read_to_string(out.report.unwrap()).unwrap();
    assert!(text.contains("undefined_mean = true"));
    assert!(text.contains("pas_all = 0"));
}

#[test]
fn optimize_selects_from_a_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::new();
    for i in 0..3 {
        let s = settings(Algorithm::Pll, 14.0, 20 + i);
        let sim = cmd_simulate(&s, &dir.path().join(format!("r{i}.bin"))).unwrap();
        manifest.push_str(&format!("r{i}.bin,r{i}.hyp.csv\n"));
        assert!(sim.hypnogram.exists());
    }
    let mpath = dir.path().join("set.txt");
    std::fs::write(&mpath, manifest).unwrap();
    let mut s = Settings::default();
    let mut grid = ParamGrid::default_for(Algorithm::Pll);
    grid.phi_t = vec![0.0, 90.0, 270.0];
    grid.gain = vec![1e-3, 1e-2];
    s.grid = Some(grid);
    s.cv_folds = 3;
    let sel = dir.path().join("selected.cfg");
    let cv = cmd_optimize(&mpath, &s, None, &dir.path().join("cv.csv"), &sel).unwrap();
    assert_eq!(cv.outcomes.len(), 6);
    let chosen = Settings::load(&sel).unwrap();
    assert_eq!(&chosen.tracker, cv.selected_config());
}

#[test]
fn malformed_manifest_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let mpath = dir.path().join("set.txt");
    std::fs::write(&mpath, "a.bin\nb.bin,c.csv,d\n").unwrap();
    let err = cmd_optimize(
        &mpath,
        &Settings::default(),
        None,
        &dir.path().join("o"),
        &dir.path().join("s"),
    )
    .unwrap_err();
    assert!(
        matches!(err, Error::Parse { .. }) || err.to_string().contains("line 2"),
        "{err}"
    );
}
