use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible (unfold/fold dims, factor column
    /// counts, tensor element-wise ops).
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input violates a value-domain contract (negative observation entries,
    /// non-binary tensor passed to flip noise, invalid config field).
    #[error("invalid input: {0}")]
    Domain(String),

    /// The solver produced non-finite values and cannot continue.
    #[error("solver diverged at outer iteration {iteration}: non-finite values encountered")]
    Divergence { iteration: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// File-format errors. Every variant that refers to a record carries the
/// 1-based line number within the offending file.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("line {line}: index ({i}, {j}, {k}) out of range for dims ({n1}, {n2}, {n3})")]
    IndexOutOfRange {
        line: usize,
        i: usize,
        j: usize,
        k: usize,
        n1: usize,
        n2: usize,
        n3: usize,
    },

    #[error("line {line}: duplicate record for index ({i}, {j}, {k})")]
    DuplicateKey {
        line: usize,
        i: usize,
        j: usize,
        k: usize,
    },

    #[error("line {line}: negative value {value} in unsigned triple file")]
    NegativeValue { line: usize, value: f64 },

    #[error("bad header: {0}")]
    Header(String),

    #[error("factor blocks disagree on rank: {0}")]
    RankMismatch(String),
}
