//! Synthetic wearable cohort: breathing flow with a known minute-ventilation
//! label, a respiration-coupled heart-rate channel, and graded artifacts.

mod artifacts;
mod dataset;
mod format;
mod profile;
mod proxy;
mod waveform;

use thiserror::Error;

pub use artifacts::{inject_artifacts, ArtifactParams};
pub use dataset::{build_dataset, split_subjects, Dataset, Split, SplitPart};
pub use format::{
    decode_dataset, encode_dataset, export_dataset, import_dataset, manifest_path, DatasetFile,
    HEADER_LEN,
};
pub use profile::{draw_profile, DatasetManifest, GeneratorParams};
pub use proxy::{generate_proxy, ProxySet, PROXY_CLASSES};
pub use waveform::{
    inspired_minute_volume, sdnn, synth_breath_waveform, synth_heart_series, BreathWaveform,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn code(self) -> u8 {
        match self {
            Sex::Female => 0,
            Sex::Male => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Sex::Female),
            1 => Some(Sex::Male),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectProfile {
    pub subject_id: u32,
    pub sex: Sex,
    pub age_years: u16,
    pub has_disorder: bool,
    /// Liters per breath.
    pub base_tidal_volume: f64,
    /// Breaths per minute.
    pub base_resp_rate: f64,
    /// Beats per minute.
    pub base_heart_rate: f64,
    /// Peak heart-rate swing (bpm) driven by the breathing phase.
    pub rsa_gain: f64,
    /// 0 is relaxed, 1 is under duress.
    pub stress_level: f64,
}

/// One minute-ventilation sample: two equally long channels and the label
/// from the clean generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    pub subject_id: u32,
    pub window_id: u32,
    pub sex: Sex,
    pub age_years: u16,
    /// L/s.
    pub resp_flow: Vec<f32>,
    /// Beats per minute.
    pub heart_series: Vec<f32>,
    pub artifact_level: u8,
    /// L/min.
    pub mv_true: f32,
}

impl SignalWindow {
    pub fn len(&self) -> usize {
        self.resp_flow.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resp_flow.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("rejected input: {0}")]
    InvalidInput(String),
    #[error("malformed dataset header: {0}")]
    MalformedHeader(String),
    #[error("dataset truncated: record {record} is incomplete at byte offset {offset} (file has {len} bytes, header promises {expected})")]
    Truncated {
        record: usize,
        offset: usize,
        len: usize,
        expected: usize,
    },
    #[error("dataset checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed record {record}: {msg}")]
    MalformedRecord { record: usize, msg: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
