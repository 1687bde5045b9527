use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "entropy overflow at q = {q}, n = {n} (D = {dim}); narrow the q range or the block ladder"
    )]
    EntropyOverflow { n: u32, q: f64, dim: u32 },

    #[error(
        "entropy overflow at q = {q}, L = {block}, n = {n}; narrow the q range or the block ladder"
    )]
    EnsembleOverflow { q: f64, block: usize, n: u32 },

    #[error("block ladder mismatch: {0}")]
    LadderMismatch(String),

    #[error("lattice position {pos} outside chain of {n_sites} sites")]
    PositionOutOfRange { pos: usize, n_sites: usize },

    #[error("engine invariant violated: {0}")]
    Invariant(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("no valid q_ext root: {0}")]
    Root(String),

    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),

    #[error("degenerate ground state (gap {gap:e})")]
    DegenerateGroundState { gap: f64 },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("malformed input {path}: {msg}")]
    Input { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
