//! Recording and hypnogram domain types.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Scored hypnogram epoch length in seconds.
pub const EPOCH_S: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Wake,
    N1,
    N2,
    N3,
    Rem,
}

impl Stage {
    /// N2 and N3.
    pub fn is_nrem(self) -> bool {
        matches!(self, Stage::N2 | Stage::N3)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Wake => "W",
            Stage::N1 => "N1",
            Stage::N2 => "N2",
            Stage::N3 => "N3",
            Stage::Rem => "REM",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "W" | "WAKE" => Ok(Stage::Wake),
            "N1" => Ok(Stage::N1),
            "N2" => Ok(Stage::N2),
            "N3" => Ok(Stage::N3),
            "REM" | "R" => Ok(Stage::Rem),
            other => Err(Error::Config(format!("unknown sleep stage `{other}`"))),
        }
    }
}

/// Sequence of 20 s scored epochs starting at t = 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Hypnogram {
    pub stages: Vec<Stage>,
}

impl Hypnogram {
    pub fn new(stages: Vec<Stage>) -> Self {
        Self { stages }
    }

    /// Builds from `(stage, minutes)` runs; minutes are rounded to whole epochs.
    pub fn from_runs(runs: &[(Stage, f64)]) -> Self {
        let mut stages = Vec::new();
        for &(stage, minutes) in runs {
            let epochs = (minutes * 60.0 / EPOCH_S).round() as usize;
            stages.extend(std::iter::repeat_n(stage, epochs));
        }
        Self { stages }
    }

    pub fn uniform(stage: Stage, epochs: usize) -> Self {
        Self {
            stages: vec![stage; epochs],
        }
    }

    /// A compact 30-minute sleep episode dominated by NREM.
    pub fn default_episode() -> Self {
        Self::from_runs(&[
            (Stage::Wake, 2.0),
            (Stage::N1, 1.0),
            (Stage::N2, 6.0),
            (Stage::N3, 12.0),
            (Stage::N2, 4.0),
            (Stage::Rem, 3.0),
            (Stage::N2, 2.0),
        ])
    }

    /// Repeating ~90-minute sleep cycles filling `hours`.
    pub fn night(hours: f64) -> Self {
        let cycle = [
            (Stage::Wake, 4.0),
            (Stage::N1, 4.0),
            (Stage::N2, 25.0),
            (Stage::N3, 30.0),
            (Stage::N2, 12.0),
            (Stage::Rem, 15.0),
        ];
        let total_epochs = (hours * 3600.0 / EPOCH_S).round() as usize;
        let one = Self::from_runs(&cycle);
        let stages = one.stages.iter().copied().cycle().take(total_epochs).collect();
        Self { stages }
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.stages.len() as f64 * EPOCH_S
    }

    /// Stage at time `t` seconds, `None` past the end.
    pub fn stage_at(&self, t: f64) -> Option<Stage> {
        if t < 0.0 {
            return None;
        }
        self.stages.get((t / EPOCH_S) as usize).copied()
    }

    /// Per-sample scored-NREM mask for `n` samples.
    pub fn nrem_mask(&self, n: usize, fs: f64) -> Vec<bool> {
        (0..n)
            .map(|i| self.stage_at(i as f64 / fs).is_some_and(Stage::is_nrem))
            .collect()
    }
}

/// Single-channel EEG in microvolts.
#[derive(Clone, Debug, PartialEq)]
pub struct EegRecording {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub label: String,
    /// Unix time of the first sample in milliseconds.
    pub start_unix_ms: i64,
    pub hypnogram: Option<Hypnogram>,
}

impl EegRecording {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(invalid("fs", format!("{fs} must be positive")));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::StreamIntegrity { index: i as u64 });
        }
        Ok(Self {
            samples,
            fs,
            label: "Fpz-M2".to_string(),
            start_unix_ms: 0,
            hypnogram: None,
        })
    }

    pub fn with_hypnogram(mut self, hyp: Hypnogram) -> Self {
        self.hypnogram = Some(hyp);
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}
