use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("spline needs at least 2 control points, got {0}")]
    TooFewControlPoints(usize),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid task: vertex loop {0} is empty")]
    EmptyLoop(usize),
    #[error("invalid task: loop vertex {index} out of range for {len} vertices")]
    LoopIndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("could not sample a non-penetrating start after {0} attempts")]
    ResetFailed(usize),
    #[error("step called on a terminated episode ({0:?})")]
    EpisodeOver(crate::funnel_env::Terminal),
    #[error("non-finite action")]
    NonFiniteAction,
    #[error("policy evaluation failed: {0}")]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("non-finite observation")]
    NonFiniteObservation,
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed policy file: {0}")]
    Malformed(String),
    #[error("unsupported policy file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("shape mismatch in layer {layer}: {detail}")]
    ShapeMismatch { layer: usize, detail: String },
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("episode {episode}: {source}")]
    Episode { episode: usize, source: EnvError },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Error)]
pub enum ClothError {
    #[error("simulation diverged: vertex {vertex} is non-finite")]
    Diverged { vertex: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid cloth parameters: {0}")]
    InvalidParams(String),
    #[error("mesh file {path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Error)]
pub enum ManipulatorError {
    #[error("manipulator description line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("invalid manipulator: {0}")]
    Invalid(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {detail}")]
    Syntax { line: usize, detail: String },
    #[error("config key `{key}`: {detail}")]
    Value { key: String, detail: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("invalid task: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Cloth(#[from] ClothError),
    #[error(transparent)]
    Manipulator(#[from] ManipulatorError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Crate-level error used at the command-line boundary.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Cloth(#[from] ClothError),
    #[error(transparent)]
    Manipulator(#[from] ManipulatorError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Task(#[from] TaskError),
}

impl Error {
    /// Short machine-parseable category for one-line error reports.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Geom(_) => "geometry",
            Error::Env(_) => "environment",
            Error::Policy(_) => "policy",
            Error::Train(_) => "training",
            Error::Cloth(_) => "cloth",
            Error::Manipulator(_) => "manipulator",
            Error::Config(_) => "config",
            Error::Task(_) => "task",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
