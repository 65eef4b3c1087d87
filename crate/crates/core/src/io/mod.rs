//! File formats: recordings, hypnograms, trigger logs, configuration and
//! report tables.

mod config;
mod recording;
mod tables;

pub use config::{parse_kv, KvFile, Settings, CONFIG_FORMAT_VERSION};
pub use recording::{
    is_binary_recording, load_recording, open_samples, read_recording_binary, read_recording_csv,
    write_recording_binary, write_recording_csv, RecordingHeader, SampleSource, MAGIC, RECORDING_VERSION,
};
pub use tables::{
    read_hypnogram, read_manifest, read_trigger_log, write_cost_report, write_cv_outcomes, write_histogram_csv,
    write_hypnogram, write_intervals_csv, write_metrics_report, write_timing_csv, write_trigger_log, ManifestEntry,
    TRIGGER_LOG_VERSION,
};

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> crate::Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| with_path(e, path))?))
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// `File::open` whose error names the path.
pub fn open_file(path: &Path) -> crate::Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| with_path(e, path))
}

/// `File::create` whose error names the path.
pub fn create_file(path: &Path) -> crate::Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| with_path(e, path))
}

/// Header block written at the top of every output.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub inputs: Vec<(String, String)>,
    pub config: Vec<String>,
}

impl Provenance {
    pub fn with_input(mut self, name: impl Into<String>, sha256: impl Into<String>) -> Self {
        self.inputs.push((name.into(), sha256.into()));
        self
    }

    pub fn with_config(mut self, kv_text: &str) -> Self {
        self.config
            .extend(kv_text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string));
        self
    }

    /// `#`-prefixed lines, newline-terminated.
    pub fn header(&self) -> String {
        let mut s = format!("# swphase {VERSION}\n");
        for (name, hash) in &self.inputs {
            s.push_str(&format!("# input {name} sha256={hash}\n"));
        }
        for line in &self.config {
            s.push_str(&format!("# config {line}\n"));
        }
        s
    }

    /// Single-line form stored inside binary recordings.
    pub fn compact(&self) -> String {
        self.header().trim_end().replace('\n', " | ")
    }
}

pub(crate) fn parse_error(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        location: format!("line {line}"),
        message: message.into(),
    }
}

pub(crate) fn byte_error(source: &str, offset: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        location: format!("byte {offset}"),
        message: message.into(),
    }
}
