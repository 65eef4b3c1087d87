use std::collections::HashMap;
use std::fmt::Display;
use std::str::FromStr;

use super::parse_error;
use crate::bench::BenchOptions;
use crate::dsp::PreprocessConfig;
use crate::error::{Error, Result};
use crate::evaluation::EvalConfig;
use crate::gate::GateConfig;
use crate::optimizer::ParamGrid;
use crate::oracle::OracleConfig;
use crate::pipeline::PipelineConfig;
use crate::recording::{Hypnogram, Stage};
use crate::synth::{AmplitudeDist, SynthSpec};
use crate::trackers::{Algorithm, TrackerConfig};

pub const CONFIG_FORMAT_VERSION: u16 = 1;

/// Ordered `key = value` entries with their line numbers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvFile {
    pub source: String,
    pub entries: Vec<(String, String, usize)>,
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_kv(text: &str, source: &str) -> Result<KvFile> {
    let mut entries: Vec<(String, String, usize)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| parse_error(source, no, "expected `key = value`"))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(parse_error(source, no, "empty key"));
        }
        if entries.iter().any(|(e, _, _)| e == k) {
            return Err(parse_error(source, no, format!("duplicate key `{k}`")));
        }
        entries.push((k.to_string(), v.trim().to_string(), no));
    }
    Ok(KvFile {
        source: source.to_string(),
        entries,
    })
}

/// Every setting of every command.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub preprocess: PreprocessConfig,
    pub tracker: TrackerConfig,
    pub gate: GateConfig,
    pub oracle: OracleConfig,
    pub synth: SynthSpec,
    /// Axes only; the base configuration is `tracker`.
    pub grid: Option<ParamGrid>,
    pub cv_folds: usize,
    pub cv_seed: u64,
    pub bench: BenchOptions,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            tracker: TrackerConfig::default(),
            gate: GateConfig::default(),
            oracle: OracleConfig::default(),
            synth: SynthSpec::default(),
            grid: None,
            cv_folds: 5,
            cv_seed: 1,
            bench: BenchOptions::default(),
        }
    }
}

fn list<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn hypnogram_runs(h: &Hypnogram) -> String {
    let mut runs: Vec<(Stage, usize)> = Vec::new();
    for &s in &h.stages {
        match runs.last_mut() {
            Some((last, n)) if *last == s => *n += 1,
            _ => runs.push((s, 1)),
        }
    }
    runs.iter()
        .map(|(s, n)| format!("{s}*{n}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_hypnogram(v: &str) -> std::result::Result<Hypnogram, String> {
    if let Some(h) = v.strip_prefix("night:") {
        let hours: f64 = h.parse().map_err(|_| format!("bad hours `{h}`"))?;
        return Ok(Hypnogram::night(hours));
    }
    if v == "episode" {
        return Ok(Hypnogram::default_episode());
    }
    let mut stages = Vec::new();
    for run in v.split(',') {
        let (s, n) = run
            .split_once('*')
            .ok_or_else(|| format!("run `{run}` is not STAGE*EPOCHS"))?;
        let s: Stage = s.trim().parse().map_err(|_| format!("bad stage `{s}`"))?;
        let n: usize = n.trim().parse().map_err(|_| format!("bad epoch count `{n}`"))?;
        stages.extend(std::iter::repeat_n(s, n));
    }
    Ok(Hypnogram::new(stages))
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("bad list item `{x}`")))
        .collect()
}

fn parse_pair(v: &str) -> std::result::Result<(f64, f64), String> {
    let xs: Vec<f64> = parse_list(v)?;
    match xs[..] {
        [a, b] => Ok((a, b)),
        _ => Err("expected two comma-separated numbers".into()),
    }
}

fn scalar<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("bad value `{v}`"))
}

impl Settings {
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut s = Settings::default();
        let mut grid_keys: HashMap<&str, (&str, usize)> = HashMap::new();
        for (k, v, no) in &kv.entries {
            let (k, v, no) = (k.as_str(), v.as_str(), *no);
            let set =
                |r: std::result::Result<(), String>| r.map_err(|m| parse_error(&kv.source, no, format!("{k}: {m}")));
            match k {
                "format.version" => {
                    let mut found = 0u16;
                    set(scalar(v).map(|x| found = x))?;
                    if found != CONFIG_FORMAT_VERSION {
                        return Err(Error::VersionMismatch {
                            found,
                            expected: CONFIG_FORMAT_VERSION,
                        });
                    }
                }
                "preprocess.notch_hz" => set(scalar(v).map(|x| s.preprocess.notch_hz = x))?,
                "preprocess.notch_q" => set(scalar(v).map(|x| s.preprocess.notch_q = x))?,
                "preprocess.highpass_hz" => set(scalar(v).map(|x| s.preprocess.highpass_hz = x))?,
                "preprocess.lowpass_hz" => set(scalar(v).map(|x| s.preprocess.lowpass_hz = x))?,
                "tracker.algorithm" => set(scalar::<Algorithm>(v).map(|x| s.tracker.algorithm = x))?,
                "tracker.phi_t" => set(scalar(v).map(|x| s.tracker.phi_t = x))?,
                "tracker.k_pll" => set(scalar(v).map(|x| s.tracker.k_pll = x))?,
                "tracker.k_pv" => set(scalar(v).map(|x| s.tracker.k_pv = x))?,
                "tracker.fs_span" => set(scalar(v).map(|x| s.tracker.fs_span = x))?,
                "tracker.at_threshold" => set(scalar(v).map(|x| s.tracker.at_threshold = x))?,
                "tracker.refractory" => set(scalar(v).map(|x| s.tracker.refractory = x))?,
                "tracker.pre_lowpass_hz" => set(if v == "none" {
                    s.tracker.pre_lowpass_hz = None;
                    Ok(())
                } else {
                    scalar(v).map(|x| s.tracker.pre_lowpass_hz = Some(x))
                })?,
                "gate.nrem_low_threshold" => set(scalar(v).map(|x| s.gate.nrem_low_threshold = x))?,
                "gate.nrem_high_threshold" => set(scalar(v).map(|x| s.gate.nrem_high_threshold = x))?,
                "gate.nrem_beta_threshold" => set(scalar(v).map(|x| s.gate.nrem_beta_threshold = x))?,
                "gate.swa_threshold" => set(scalar(v).map(|x| s.gate.swa_threshold = x))?,
                "gate.beta_threshold" => set(scalar(v).map(|x| s.gate.beta_threshold = x))?,
                "gate.window_step_s" => set(scalar(v).map(|x| s.gate.window_step_s = x))?,
                "gate.nrem_history_s" => set(scalar(v).map(|x| s.gate.nrem_history_s = x))?,
                "gate.onoff_period_s" => set(scalar(v).map(|x| s.gate.onoff_period_s = x))?,
                "gate.onoff_enabled" => set(scalar(v).map(|x| s.gate.onoff_enabled = x))?,
                "oracle.band" => set(parse_pair(v).map(|x| s.oracle.band = x))?,
                "oracle.order" => set(scalar(v).map(|x| s.oracle.order = x))?,
                "oracle.stopband_db" => set(scalar(v).map(|x| s.oracle.stopband_db = x))?,
                "oracle.crop_s" => set(scalar(v).map(|x| s.oracle.crop_s = x))?,
                "synth.fs" => set(scalar(v).map(|x| s.synth.fs = x))?,
                "synth.hypnogram" => set(parse_hypnogram(v).map(|x| s.synth.hypnogram = x))?,
                "synth.sw_pp_range" => set(parse_pair(v).map(|x| s.synth.sw_pp_range = x))?,
                "synth.sw_pp_dist" => set(scalar::<AmplitudeDist>(v).map(|x| s.synth.sw_pp_dist = x))?,
                "synth.freq_center_hz" => set(scalar(v).map(|x| s.synth.freq_center_hz = x))?,
                "synth.freq_log_sd" => set(scalar(v).map(|x| s.synth.freq_log_sd = x))?,
                "synth.freq_corr_s" => set(scalar(v).map(|x| s.synth.freq_corr_s = x))?,
                "synth.freq_bounds_hz" => set(parse_pair(v).map(|x| s.synth.freq_bounds_hz = x))?,
                "synth.noise_rms" => set(scalar(v).map(|x| s.synth.noise_rms = x))?,
                "synth.spindle_rate_per_min" => set(scalar(v).map(|x| s.synth.spindle_rate_per_min = x))?,
                "synth.spindle_pp" => set(scalar(v).map(|x| s.synth.spindle_pp = x))?,
                "synth.beta_rms" => set(scalar(v).map(|x| s.synth.beta_rms = x))?,
                "synth.alpha_rms" => set(scalar(v).map(|x| s.synth.alpha_rms = x))?,
                "synth.seed" => set(scalar(v).map(|x| s.synth.seed = x))?,
                "cv.folds" => set(scalar(v).map(|x| s.cv_folds = x))?,
                "cv.seed" => set(scalar(v).map(|x| s.cv_seed = x))?,
                "bench.repetitions" => set(scalar(v).map(|x| s.bench.repetitions = x))?,
                "bench.warmup" => set(scalar(v).map(|x| s.bench.warmup = x))?,
                "bench.batch" => set(scalar(v).map(|x| s.bench.batch = x))?,
                "grid.algorithm" | "grid.phi_t" | "grid.gain" | "grid.fs_span" | "grid.at_threshold" => {
                    grid_keys.insert(k, (v, no));
                }
                _ => return Err(parse_error(&kv.source, no, format!("unknown key `{k}`"))),
            }
        }
        if !grid_keys.is_empty() {
            let (alg, no) = grid_keys
                .get("grid.algorithm")
                .map(|&(v, no)| (v.parse::<Algorithm>(), no))
                .unwrap_or((Ok(s.tracker.algorithm), 1));
            let alg = alg.map_err(|_| parse_error(&kv.source, no, "grid.algorithm: bad algorithm"))?;
            let mut g = ParamGrid::default_for(alg);
            g.base = TrackerConfig {
                algorithm: alg,
                ..s.tracker.clone()
            };
            let err = |k: &str, no: usize, m: String| parse_error(&kv.source, no, format!("{k}: {m}"));
            if let Some(&(v, no)) = grid_keys.get("grid.phi_t") {
                g.phi_t = parse_list(v).map_err(|m| err("grid.phi_t", no, m))?;
            }
            if let Some(&(v, no)) = grid_keys.get("grid.gain") {
                g.gain = if v.is_empty() {
                    vec![]
                } else {
                    parse_list(v).map_err(|m| err("grid.gain", no, m))?
                };
            }
            if let Some(&(v, no)) = grid_keys.get("grid.fs_span") {
                g.fs_span = parse_list(v).map_err(|m| err("grid.fs_span", no, m))?;
            }
            if let Some(&(v, no)) = grid_keys.get("grid.at_threshold") {
                g.at_threshold = parse_list(v).map_err(|m| err("grid.at_threshold", no, m))?;
            }
            s.grid = Some(g);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        Self::from_kv(&parse_kv(text, source)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(
            &std::io::read_to_string(super::open_file(path)?)?,
            &path.display().to_string(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.gate.validate()?;
        self.synth.validate()?;
        self.bench.validate()?;
        if self.cv_folds < 2 {
            return Err(Error::Config("cv.folds must be at least 2".into()));
        }
        if let Some(g) = &self.grid {
            g.combos()?;
        }
        Ok(())
    }

    /// Text that [`Settings::parse`] maps back to `self`.
    pub fn to_kv(&self) -> String {
        let p = &self.preprocess;
        let t = &self.tracker;
        let g = &self.gate;
        let o = &self.oracle;
        let y = &self.synth;
        let mut lines = vec![
            format!("format.version = {CONFIG_FORMAT_VERSION}"),
            format!("preprocess.notch_hz = {}", p.notch_hz),
            format!("preprocess.notch_q = {}", p.notch_q),
            format!("preprocess.highpass_hz = {}", p.highpass_hz),
            format!("preprocess.lowpass_hz = {}", p.lowpass_hz),
            format!("tracker.algorithm = {}", t.algorithm),
            format!("tracker.phi_t = {}", t.phi_t),
            format!("tracker.k_pll = {}", t.k_pll),
            format!("tracker.k_pv = {}", t.k_pv),
            format!("tracker.fs_span = {}", t.fs_span),
            format!("tracker.at_threshold = {}", t.at_threshold),
            format!("tracker.refractory = {}", t.refractory),
            format!(
                "tracker.pre_lowpass_hz = {}",
                t.pre_lowpass_hz.map_or("none".to_string(), |x| x.to_string())
            ),
            format!("gate.nrem_low_threshold = {}", g.nrem_low_threshold),
            format!("gate.nrem_high_threshold = {}", g.nrem_high_threshold),
            format!("gate.nrem_beta_threshold = {}", g.nrem_beta_threshold),
            format!("gate.swa_threshold = {}", g.swa_threshold),
            format!("gate.beta_threshold = {}", g.beta_threshold),
            format!("gate.window_step_s = {}", g.window_step_s),
            format!("gate.nrem_history_s = {}", g.nrem_history_s),
            format!("gate.onoff_period_s = {}", g.onoff_period_s),
            format!("gate.onoff_enabled = {}", g.onoff_enabled),
            format!("oracle.band = {},{}", o.band.0, o.band.1),
            format!("oracle.order = {}", o.order),
            format!("oracle.stopband_db = {}", o.stopband_db),
            format!("oracle.crop_s = {}", o.crop_s),
            format!("synth.fs = {}", y.fs),
            format!("synth.hypnogram = {}", hypnogram_runs(&y.hypnogram)),
            format!("synth.sw_pp_range = {},{}", y.sw_pp_range.0, y.sw_pp_range.1),
            format!("synth.sw_pp_dist = {}", y.sw_pp_dist.as_str()),
            format!("synth.freq_center_hz = {}", y.freq_center_hz),
            format!("synth.freq_log_sd = {}", y.freq_log_sd),
            format!("synth.freq_corr_s = {}", y.freq_corr_s),
            format!("synth.freq_bounds_hz = {},{}", y.freq_bounds_hz.0, y.freq_bounds_hz.1),
            format!("synth.noise_rms = {}", y.noise_rms),
            format!("synth.spindle_rate_per_min = {}", y.spindle_rate_per_min),
            format!("synth.spindle_pp = {}", y.spindle_pp),
            format!("synth.beta_rms = {}", y.beta_rms),
            format!("synth.alpha_rms = {}", y.alpha_rms),
            format!("synth.seed = {}", y.seed),
            format!("cv.folds = {}", self.cv_folds),
            format!("cv.seed = {}", self.cv_seed),
            format!("bench.repetitions = {}", self.bench.repetitions),
            format!("bench.warmup = {}", self.bench.warmup),
            format!("bench.batch = {}", self.bench.batch),
        ];
        if let Some(gr) = &self.grid {
            lines.push(format!("grid.algorithm = {}", gr.algorithm));
            lines.push(format!("grid.phi_t = {}", list(&gr.phi_t)));
            lines.push(format!("grid.gain = {}", list(&gr.gain)));
            lines.push(format!("grid.fs_span = {}", list(&gr.fs_span)));
            lines.push(format!("grid.at_threshold = {}", list(&gr.at_threshold)));
        }
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            preprocess: self.preprocess,
            tracker: self.tracker.clone(),
            gate: self.gate.clone(),
        }
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig {
            preprocess: self.preprocess,
            gate: self.gate.clone(),
            oracle: self.oracle,
        }
    }

    /// Grid to search: the declared one, else the default for the tracker's algorithm.
    pub fn grid_or_default(&self) -> ParamGrid {
        self.grid.clone().unwrap_or_else(|| {
            let mut g = ParamGrid::default_for(self.tracker.algorithm);
            g.base = self.tracker.clone();
            g
        })
    }
}
