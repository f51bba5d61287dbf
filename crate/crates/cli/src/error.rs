use std::io;
use std::path::Path;

use ventnet_core::stats::StatsError;
use ventnet_core::synth::SynthError;
use ventnet_core::trainer::TrainError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    /// Unexpected I/O failure while writing outputs.
    Io,
    /// Bad key or value, inconsistent inputs, refused overwrite.
    Config,
    MissingInput,
    DataFormat,
    /// Training or evaluation produced NaN or infinity.
    Numeric,
}

impl Class {
    pub fn exit_code(self) -> i32 {
        match self {
            Class::Io => 1,
            Class::Config => 2,
            Class::MissingInput => 3,
            Class::DataFormat => 4,
            Class::Numeric => 5,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub message: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub type Result<T> = std::result::Result<T, Failure>;

pub fn fail(class: Class, message: impl Into<String>) -> Failure {
    Failure {
        class,
        message: message.into(),
    }
}

pub fn config(message: impl Into<String>) -> Failure {
    fail(Class::Config, message)
}

/// Classifies an error raised while reading `path`.
pub fn read_error(path: &Path, e: &io::Error) -> Failure {
    if e.kind() == io::ErrorKind::NotFound {
        fail(Class::MissingInput, format!("missing input: {}", path.display()))
    } else {
        fail(Class::Io, format!("{}: {e}", path.display()))
    }
}

/// Errors from decoding a dataset file.
pub fn from_dataset(path: &Path, e: SynthError) -> Failure {
    match e {
        SynthError::Io(io) => read_error(path, &io),
        SynthError::InvalidInput(_) | SynthError::Manifest(_) => config(format!("{}: {e}", path.display())),
        other => fail(Class::DataFormat, format!("{}: {other}", path.display())),
    }
}

pub fn from_train(context: &str, e: TrainError) -> Failure {
    let class = match &e {
        TrainError::Config(_) | TrainError::Shape(_) => Class::Config,
        TrainError::NonFinite { .. } => Class::Numeric,
        TrainError::BadMagic | TrainError::Version(_) | TrainError::Checksum { .. } | TrainError::Format(_) => {
            Class::DataFormat
        }
        TrainError::Io(io) if io.kind() == io::ErrorKind::NotFound => Class::MissingInput,
        TrainError::Graph(_) | TrainError::Autodiff(_) | TrainError::Io(_) => Class::Io,
    };
    fail(class, format!("{context}: {e}"))
}

pub fn from_stats(context: &str, e: StatsError) -> Failure {
    let class = match &e {
        StatsError::NonFinite => Class::Numeric,
        StatsError::Length(_) | StatsError::Mismatch(_) | StatsError::Config(_) => Class::Config,
        StatsError::ZeroVariance | StatsError::Degenerate(_) => Class::DataFormat,
    };
    fail(class, format!("{context}: {e}"))
}
