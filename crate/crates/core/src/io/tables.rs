use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{parse_error, Provenance};
use crate::bench::CostReport;
use crate::error::{Error, Result};
use crate::evaluation::MetricsReport;
use crate::gate::{GateDecision, SuppressionReason};
use crate::metrics::{INTERVAL_BIN_S, INTERVAL_RANGE_S};
use crate::optimizer::CvResult;
use crate::pipeline::LoggedTrigger;
use crate::recording::{Hypnogram, Stage};
use crate::trackers::Algorithm;

pub const TRIGGER_LOG_VERSION: u16 = 1;
const TRIGGER_COLUMNS: &str = "sample_index,time_s,algorithm,tracker_phase_deg,delivered,suppression_reason,on_window";

/// Non-empty, non-comment lines with their 1-based numbers.
fn data_lines<R: Read>(r: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push((i + 1, t.to_string()));
        }
    }
    Ok(out)
}

pub fn write_hypnogram<W: Write>(w: W, hyp: &Hypnogram) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "epoch,stage")?;
    for (i, s) in hyp.stages.iter().enumerate() {
        writeln!(w, "{i},{s}")?;
    }
    w.flush()?;
    Ok(())
}

/// Epochs must be contiguous from 0.
pub fn read_hypnogram<R: Read>(r: R, source: &str) -> Result<Hypnogram> {
    let mut stages = Vec::new();
    for (no, line) in data_lines(r)? {
        if line == "epoch,stage" {
            continue;
        }
        let (e, s) = line
            .split_once(',')
            .ok_or_else(|| parse_error(source, no, "expected `epoch,stage`"))?;
        let e: usize = e
            .trim()
            .parse()
            .map_err(|_| parse_error(source, no, format!("bad epoch `{e}`")))?;
        if e != stages.len() {
            return Err(parse_error(
                source,
                no,
                format!("epoch {e} out of sequence, expected {}", stages.len()),
            ));
        }
        let s: Stage = s
            .trim()
            .parse()
            .map_err(|_| parse_error(source, no, format!("bad stage `{s}`")))?;
        stages.push(s);
    }
    Ok(Hypnogram::new(stages))
}

fn bool_str(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_trigger_log<W: Write>(w: W, log: &[LoggedTrigger], prov: &Provenance) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "# format trigger-log {TRIGGER_LOG_VERSION}")?;
    w.write_all(prov.header().as_bytes())?;
    writeln!(w, "{TRIGGER_COLUMNS}")?;
    for t in log {
        let phase = t.tracker_phase_deg.map(|p| p.to_string()).unwrap_or_default();
        let reason = t.decision.reason().map(|r| r.as_str()).unwrap_or("");
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            t.sample_index,
            t.time_s,
            t.algorithm,
            phase,
            bool_str(t.delivered()),
            reason,
            bool_str(t.on_window)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trigger log written by [`write_trigger_log`]; `#` lines are
/// skipped after the format line is checked.
pub fn read_trigger_log<R: Read>(r: R, source: &str) -> Result<Vec<LoggedTrigger>> {
    let mut out: Vec<LoggedTrigger> = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let no = i + 1;
        let line = line?;
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("# format trigger-log ") {
            let v: u16 = rest
                .trim()
                .parse()
                .map_err(|_| parse_error(source, no, "bad format version"))?;
            if v != TRIGGER_LOG_VERSION {
                return Err(Error::VersionMismatch {
                    found: v,
                    expected: TRIGGER_LOG_VERSION,
                });
            }
            continue;
        }
        if t.is_empty() || t.starts_with('#') || t == TRIGGER_COLUMNS {
            continue;
        }
        let f: Vec<&str> = t.split(',').collect();
        if f.len() != 7 {
            return Err(parse_error(source, no, format!("expected 7 fields, found {}", f.len())));
        }
        let bad = |what: &str, v: &str| parse_error(source, no, format!("bad {what} `{v}`"));
        let flag = |what: &str, v: &str| match v {
            "1" => Ok(true),
            "0" => Ok(false),
            _ => Err(bad(what, v)),
        };
        let sample_index: u64 = f[0].parse().map_err(|_| bad("sample_index", f[0]))?;
        let time_s: f64 = f[1].parse().map_err(|_| bad("time_s", f[1]))?;
        let algorithm: Algorithm = f[2].parse().map_err(|_| bad("algorithm", f[2]))?;
        let tracker_phase_deg = if f[3].is_empty() {
            None
        } else {
            Some(f[3].parse::<f64>().map_err(|_| bad("tracker_phase_deg", f[3]))?)
        };
        let delivered = flag("delivered", f[4])?;
        let decision = match (delivered, f[5]) {
            (true, "") => GateDecision::Delivered,
            (false, r) => GateDecision::Suppressed(
                r.parse::<SuppressionReason>()
                    .map_err(|_| bad("suppression_reason", r))?,
            ),
            (true, r) => return Err(bad("suppression_reason on delivered trigger", r)),
        };
        if let Some(prev) = out.iter().rev().find(|p| p.algorithm == algorithm) {
            if prev.sample_index >= sample_index {
                return Err(parse_error(source, no, "sample indices must increase"));
            }
        }
        out.push(LoggedTrigger {
            sample_index,
            time_s,
            algorithm,
            tracker_phase_deg,
            decision,
            on_window: flag("on_window", f[6])?,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub recording: PathBuf,
    pub hypnogram: Option<PathBuf>,
}

/// One `recording[,hypnogram]` per line, paths relative to the manifest.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let source = path.display().to_string();
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (no, line) in data_lines(super::open_file(path)?)? {
        let mut parts = line.split(',').map(str::trim);
        let rec = parts.next().filter(|s| !s.is_empty());
        let rec = rec.ok_or_else(|| parse_error(&source, no, "missing recording path"))?;
        let hyp = parts.next().filter(|s| !s.is_empty()).map(|h| dir.join(h));
        if parts.next().is_some() {
            return Err(parse_error(&source, no, "too many fields"));
        }
        out.push(ManifestEntry {
            recording: dir.join(rec),
            hypnogram: hyp,
        });
    }
    if out.is_empty() {
        return Err(parse_error(&source, 1, "manifest lists no recordings"));
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "undefined".into())
}

/// `key = value` report.
pub fn write_metrics_report<W: Write>(w: W, m: &MetricsReport, prov: &Provenance) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(prov.header().as_bytes())?;
    let alg = m.algorithm.map(|a| a.as_str()).unwrap_or("none");
    writeln!(w, "algorithm = {alg}")?;
    writeln!(w, "candidates = {}", m.candidates)?;
    writeln!(w, "delivered = {}", m.delivered)?;
    for (r, n) in SuppressionReason::ALL.iter().zip(m.suppressed) {
        writeln!(w, "suppressed.{} = {n}", r.as_str())?;
    }
    writeln!(w, "scored = {}", m.scored)?;
    writeln!(w, "delivered_outside_windows = {}", m.delivered_outside_windows)?;
    writeln!(w, "qualifying_windows = {}", m.qualifying_windows)?;
    writeln!(w, "scored_nrem_windows = {}", m.scored_nrem_windows)?;
    writeln!(w, "undefined_mean = {}", m.undefined_mean)?;
    writeln!(w, "circular_mean_deg = {}", opt(m.circular.map(|c| c.mean_deg)))?;
    writeln!(w, "circular_sd_deg = {}", opt(m.circular.map(|c| c.sd_deg)))?;
    writeln!(w, "resultant_length = {}", opt(m.circular.map(|c| c.resultant)))?;
    writeln!(w, "cmae45_norm = {}", opt(m.cmae45.map(|c| c.0)))?;
    writeln!(w, "cmae45_deg = {}", opt(m.cmae45.map(|c| c.1)))?;
    writeln!(w, "pas_all = {}", m.pas.map_or(0.0, |p| p.pas_all))?;
    writeln!(w, "pas_in_up = {}", m.pas.map_or(0.0, |p| p.pas_in_up))?;
    writeln!(w, "pas_not_up = {}", m.pas.map_or(0.0, |p| p.pas_not_up))?;
    writeln!(w, "up_fraction = {}", opt(m.up_fraction()))?;
    let o = m.objectives();
    writeln!(w, "ed = {}", crate::optimizer::objective_distance(&o))?;
    writeln!(w, "targeting.low_pct = {}", m.targeting.low_pct)?;
    writeln!(w, "targeting.high_pct = {}", m.targeting.high_pct)?;
    writeln!(w, "targeting.low_waves = {}", m.targeting.low_waves)?;
    writeln!(w, "targeting.high_waves = {}", m.targeting.high_waves)?;
    writeln!(
        w,
        "interval.median_s = {}",
        opt(m.intervals.as_ref().map(|i| i.median_s))
    )?;
    writeln!(w, "interval.sd_s = {}", opt(m.intervals.as_ref().map(|i| i.sd_s)))?;
    writeln!(w, "candidate.cmae45_norm = {}", opt(m.candidate_cmae45.map(|c| c.0)))?;
    writeln!(
        w,
        "candidate.circular_mean_deg = {}",
        opt(m.candidate_circular.map(|c| c.mean_deg))
    )?;
    writeln!(w, "candidate.n = {}", m.candidate_phases_deg.len())?;
    w.flush()?;
    Ok(())
}

/// 36 rows of `bin_start_deg,bin_end_deg,count`.
pub fn write_histogram_csv<W: Write>(w: W, m: &MetricsReport) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "bin_start_deg,bin_end_deg,count")?;
    let width = 360 / m.histogram.len();
    for (i, c) in m.histogram.iter().enumerate() {
        writeln!(w, "{},{},{c}", i * width, (i + 1) * width)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_intervals_csv<W: Write>(w: W, m: &MetricsReport) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "bin_start_s,bin_end_s,count")?;
    if let Some(iv) = &m.intervals {
        writeln!(w, "0,{},{}", INTERVAL_RANGE_S.0, iv.below)?;
        for (i, c) in iv.histogram.iter().enumerate() {
            let lo = INTERVAL_RANGE_S.0 + i as f64 * INTERVAL_BIN_S;
            writeln!(w, "{:.2},{:.2},{c}", lo, lo + INTERVAL_BIN_S)?;
        }
        writeln!(w, "{},inf,{}", INTERVAL_RANGE_S.1, iv.above)?;
    }
    w.flush()?;
    Ok(())
}

/// Full outcome table, one row per combo in grid order.
pub fn write_cv_outcomes<W: Write>(w: W, cv: &CvResult, prov: &Provenance) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(prov.header().as_bytes())?;
    let k = cv.folds.len();
    write!(
        w,
        "index,algorithm,phi_t,k_pll,k_pv,fs_span,at_threshold,mean_opt_ed,mean_val_ed,ed_error,\
         val_cmae_norm,val_pas_not_up_norm,val_pas_in_up_norm,dominated,selected"
    )?;
    for j in 0..k {
        write!(w, ",opt_ed_{j},val_ed_{j}")?;
    }
    writeln!(w)?;
    for (i, o) in cv.outcomes.iter().enumerate() {
        let c = &o.config;
        write!(
            w,
            "{i},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.algorithm,
            c.phi_t,
            c.k_pll,
            c.k_pv,
            c.fs_span,
            c.at_threshold,
            o.mean_opt,
            o.mean_val,
            o.ed_error,
            o.val_objectives.cmae_norm,
            o.val_objectives.pas_not_up_norm,
            o.val_objectives.pas_in_up_norm,
            bool_str(o.dominated),
            bool_str(o.selected)
        )?;
        for j in 0..k {
            write!(w, ",{},{}", o.ed_opt[j], o.ed_val[j])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cost_report<W: Write>(w: W, r: &CostReport, prov: &Provenance) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(prov.header().as_bytes())?;
    writeln!(w, "label = {}", r.label)?;
    writeln!(w, "fs = {}", r.fs)?;
    writeln!(w, "batch = {}", r.batch)?;
    writeln!(w, "timer_resolution_ns = {}", r.timer_resolution_ns)?;
    writeln!(w, "median_ns = {}", r.median_ns)?;
    writeln!(w, "q1_ns = {}", r.q1_ns)?;
    writeln!(w, "q3_ns = {}", r.q3_ns)?;
    writeln!(w, "rcr = {}", r.rcr)?;
    writeln!(w, "efficiency = {}", r.efficiency)?;
    writeln!(w, "ops.add = {}", r.ops.add)?;
    writeln!(w, "ops.mul = {}", r.ops.mul)?;
    writeln!(w, "ops.div = {}", r.ops.div)?;
    writeln!(w, "ops.cmp = {}", r.ops.cmp)?;
    writeln!(w, "ops.transcendental = {}", r.ops.transcendental)?;
    for (i, run) in r.runs.iter().enumerate() {
        writeln!(w, "run.{i} = {} {} {}", run.median_ns, run.q1_ns, run.q3_ns)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-batch per-sample times of the reported repetition.
pub fn write_timing_csv<W: Write>(w: W, r: &CostReport) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "batch,ns_per_sample")?;
    for (i, t) in r.samples_ns.iter().enumerate() {
        writeln!(w, "{i},{t}")?;
    }
    w.flush()?;
    Ok(())
}
