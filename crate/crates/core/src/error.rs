use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),
    #[error("level {level} is beyond the available depth {available}")]
    DepthExceeded { level: usize, available: usize },
    #[error("floating-point overflow: {0}")]
    Overflow(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("path enumeration at level {level} needs {count} paths, cap is {cap}")]
    PathCap {
        level: usize,
        count: String,
        cap: u64,
    },
    #[error("table is not a KMS state: paths {first} and {second} disagree by {gap:e}")]
    InconsistentTable {
        first: usize,
        second: usize,
        gap: f64,
    },
    #[error("tolerance {requested:e} unreachable, best certified bound {best:e}")]
    ToleranceUnreachable { requested: f64, best: f64 },
    #[error("contraction bound violated at level {level}: ratio {ratio} exceeds {bound}")]
    ContractionViolated {
        level: usize,
        ratio: f64,
        bound: f64,
    },
    #[error("seed {seed} cannot be telescoped past level {level}")]
    NotTelescopable { seed: usize, level: usize },
    #[error("vector is not in the cone: {0}")]
    NotInCone(String),
    #[error("remainder has a negative entry {value:e} at level {level}, vertex {vertex}")]
    NegativeRemainder {
        level: usize,
        vertex: usize,
        value: f64,
    },
    #[error("window search for level {level} exceeded {cap} factors")]
    WindowCap { level: usize, cap: usize },
    #[error("certificate check failed: {0}")]
    Certificate(String),
    #[error("spec error: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
