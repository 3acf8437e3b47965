use std::io;

use thiserror::Error;

use crate::ids::{CategoryId, DomainId, FeatureId, TokenId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Problems with the on-disk model file.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("model file truncated: need {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("model checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("corrupt model body: {0}")]
    Corrupt(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("model is frozen")]
    ModelFrozen,
    #[error("model is not frozen")]
    ModelNotFrozen,
    #[error("unknown token id {0}")]
    UnknownToken(TokenId),
    #[error("unknown feature id {0}")]
    UnknownFeature(FeatureId),
    #[error("unknown category id {0}")]
    UnknownCategory(CategoryId),
    #[error("unknown domain id {0}")]
    UnknownDomainId(DomainId),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("evidence delta must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] io::Error),
}
