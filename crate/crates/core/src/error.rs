use thiserror::Error;

use crate::state::ModeLabel;

/// Everything that can go wrong inside the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown path identifier `{0}`")]
    UnknownPath(String),
    #[error("paths passed to an optical element must be distinct, `{0}` repeats")]
    PathCollision(String),
    #[error("invalid delay class: depth {depth}, long count {long}")]
    InvalidDelay { depth: u8, long: u8 },
    #[error("photon in mode {0} would exceed the two-pass delay depth")]
    DelayOverflow(ModeLabel),
    #[error("amplitude magnitude {0} exceeds 1")]
    AmplitudeTooLarge(f64),
    #[error("basis state holds {0} photons, the limit is {max}", max = crate::state::MAX_PHOTONS)]
    TooManyPhotons(usize),
    #[error("states overlap in mode {0}")]
    ModeCollision(ModeLabel),
    #[error("mode map is not an isometry (deviation {0:e})")]
    NotIsometric(f64),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("invalid measurement pattern: {0}")]
    Pattern(String),
    #[error("vertex {0} was already measured")]
    AlreadyMeasured(usize),
    #[error("register of {0} qubits exceeds the cap of {1}")]
    RegisterTooLarge(usize, usize),
    #[error("missing outcome for dependency vertex {0}")]
    MissingOutcome(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the file system rather than by bad input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
