use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("shoot-through: leg {leg} has both gates commanded on")]
    ShootThrough { leg: usize },

    #[error("simulation diverged at t = {time:.6} s: {quantity} = {value}")]
    Diverged {
        time: f64,
        quantity: &'static str,
        value: f64,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("sample {index} has no fault label")]
    MissingLabel { index: usize },

    #[error("input stream has a gap before sample {index} (t = {time:.9} s)")]
    StreamGap { index: usize, time: f64 },

    #[error("dataset has a single class ({0}); at least two are required")]
    SingleClass(String),

    #[error("feature length mismatch: expected {expected}, got {got}")]
    FeatureLength { expected: usize, got: usize },

    #[error("incomplete window: {got} of {expected} predictions")]
    IncompleteWindow { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
