use alloc::string::String;
use core::fmt;

/// Errors raised by the core library.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    EmptyDataset,
    EmptyValues,
    EmptyBatch,
    /// Quantile level outside (0, 1).
    QuantileLevel(f64),
    /// Parameter/sequence dimensions do not line up.
    ShapeMismatch { expected: usize, got: usize },
    LengthMismatch { expected: usize, got: usize },
    TokenOutOfRange { token: usize, vocab: usize },
    VocabTooSmall(usize),
    DuplicateSymbol(char),
    UnknownSymbol(char),
    NonFinite(&'static str),
    /// Same sequence appears twice where keys must be unique.
    DuplicateKey(String),
    ZeroNormalizer,
    /// q places mass where the reference distribution has none.
    AbsoluteContinuity,
    MotifTooLong { motif: usize, seq: usize },
    DomainTooLarge { size: u64, max: u64 },
    NonFiniteGradient { iteration: usize },
    NotPositiveDefinite,
    InvalidParam(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyDataset => write!(f, "empty dataset"),
            Error::EmptyValues => write!(f, "empty value list"),
            Error::EmptyBatch => write!(f, "empty batch"),
            Error::QuantileLevel(g) => write!(f, "quantile level {g} outside (0, 1)"),
            Error::ShapeMismatch { expected, got } => {
                write!(f, "shape mismatch: expected {expected}, got {got}")
            }
            Error::LengthMismatch { expected, got } => {
                write!(f, "sequence length mismatch: expected {expected}, got {got}")
            }
            Error::TokenOutOfRange { token, vocab } => {
                write!(f, "token index {token} out of range for vocabulary of size {vocab}")
            }
            Error::VocabTooSmall(n) => write!(f, "vocabulary needs at least 2 symbols, got {n}"),
            Error::DuplicateSymbol(c) => write!(f, "duplicate vocabulary symbol {c:?}"),
            Error::UnknownSymbol(c) => write!(f, "symbol {c:?} not in vocabulary"),
            Error::NonFinite(what) => write!(f, "non-finite {what}"),
            Error::DuplicateKey(s) => write!(f, "duplicate key {s:?}"),
            Error::ZeroNormalizer => write!(f, "zero normalizer"),
            Error::AbsoluteContinuity => write!(f, "absolute continuity violated"),
            Error::MotifTooLong { motif, seq } => {
                write!(f, "motif length {motif} exceeds sequence length {seq}")
            }
            Error::DomainTooLarge { size, max } => {
                write!(f, "domain size {size} exceeds enumeration limit {max}")
            }
            Error::NonFiniteGradient { iteration } => {
                write!(f, "non-finite gradient at iteration {iteration}")
            }
            Error::NotPositiveDefinite => write!(f, "matrix not positive definite"),
            Error::InvalidParam(what) => write!(f, "invalid parameter: {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
