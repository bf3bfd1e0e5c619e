// SPDX-License-Identifier: Apache-2.0

use crate::netlist::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid netlist: {0}")]
    Invalid(ValidationReport),

    #[error("combinational cycle through gates {0:?}")]
    Cycle(Vec<String>),

    #[error("input error: {0}")]
    Input(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("input space of {combinations} combinations exceeds the enumeration cap of {cap}")]
    Capacity { combinations: u128, cap: u64 },

    #[error(
        "illegal codeword on channel `{channel}` at t = {time_ps} ps (more than one rail high)"
    )]
    IllegalCodeword { channel: String, time_ps: f64 },

    #[error("simulation did not complete: {0}")]
    NonQuiescent(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("average of an empty trace set is undefined")]
    EmptySet,

    #[error("missing capacitance for position ({level},{index})")]
    MissingCapacitance { level: u8, index: u8 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
