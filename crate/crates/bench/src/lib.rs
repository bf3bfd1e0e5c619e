// SPDX-License-Identifier: Apache-2.0

//! Shared fixtures for the criterion benchmarks.

use qdi_dpa::dissym::set_rail_imbalance;
use qdi_dpa::{builtin_add_round_key, Netlist, SimConfig, Simulator, Target, TraceMatrix};

/// Key embedded in the benchmark traces.
pub const KEY: u8 = 0x3C;

/// AddRoundKey bank with output channel `c0` unbalanced by `d_a`.
pub fn leaky_add_round_key(d_a: f64) -> Netlist {
    let mut n = builtin_add_round_key();
    set_rail_imbalance(&mut n, "c0", d_a).expect("builtin channel");
    n
}

pub fn simulator(netlist: &Netlist) -> Simulator {
    Simulator::new(netlist, SimConfig::default()).expect("builtin netlist")
}

/// 256 exhaustive traces of the leaky bank.
pub fn exhaustive_traces(sim: &Simulator, noise_sigma: f64, seed: u64) -> TraceMatrix {
    let pts = Target::AddRoundKey.exhaustive_plaintexts();
    sim.collect_traces(&pts, KEY, Target::AddRoundKey, noise_sigma, seed)
        .expect("simulation")
}
