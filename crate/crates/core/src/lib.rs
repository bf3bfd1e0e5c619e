// SPDX-License-Identifier: Apache-2.0

//! Gate-level side-channel workbench for quasi-delay-insensitive dual-rail
//! circuits.
//!
//! The crate is organised bottom-up:
//!
//! * [`netlist`] and [`designs`]: gate/net/channel representation, JSON
//!   parsing and validation, and the builtin DIMS XOR and AddRoundKey designs.
//! * [`graph`]: the annotated directed graph, levelization, switching
//!   profiles and balance verification.
//! * [`current`]: capacitance to current pulses, block waveforms, power
//!   estimates and the closed-form XOR bias signature.
//! * [`sim`]: event-driven four-phase simulation and trace collection.
//! * [`dpa`]: selection functions, partitioning, averaging, bias and key
//!   ranking.
//! * [`dissym`]: per-channel rail dissymmetry and flat vs hierarchical
//!   capacitance assignment.
//! * [`io`]: CSV and JSON exchange formats shared with the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod current;
pub mod designs;
pub mod dissym;
pub mod dpa;
mod error;
pub mod graph;
pub mod io;
pub mod netlist;
pub mod sim;

pub use current::{CurrentPulse, ElectricalParams, Polarity, Waveform};
pub use designs::{builtin_add_round_key, builtin_dims_xor};
pub use dissym::{DissymmetryReport, PlacementMode, PlacementParams};
pub use dpa::{Algorithm, DpaResult, SelectionFunction};
pub use error::{Error, Result};
pub use graph::{BalanceReport, CircuitGraph, SwitchingProfile};
pub use netlist::{Assignment, Channel, Codeword, Gate, GateKind, Net, Netlist, ValidationReport};
pub use sim::{SimConfig, Simulator, Target, TraceMatrix, TransitionEvent};

/// Version tag written into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;
