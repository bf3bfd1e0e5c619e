// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the integration and acceptance targets.

#![allow(dead_code)]

use proptest::prelude::*;
use qdi_dpa::dpa::{self, Lobe};
use qdi_dpa::{
    Assignment, Channel, Codeword, Gate, GateKind, Net, Netlist, SimConfig, Simulator, Target,
};

/// A monotone netlist over dual-rail inputs without acknowledges, plus one
/// valid input assignment for it.
#[derive(Debug, Clone)]
pub struct MonotoneCase {
    pub netlist: Netlist,
    pub inputs: Assignment,
}

fn build_monotone(
    channels: usize,
    gate_specs: &[(u8, u32, u32, u32)],
    caps: &[(f64, f64, f64)],
    values: &[bool],
) -> MonotoneCase {
    let mut nets: Vec<String> = Vec::new();
    let mut chans = Vec::new();
    for c in 0..channels {
        let rails = vec![format!("x{c}_0"), format!("x{c}_1")];
        nets.extend(rails.iter().cloned());
        chans.push(Channel {
            name: format!("x{c}"),
            rails,
            ack: None,
        });
    }
    let mut gates = Vec::new();
    for (g, &(kind, i1, i2, i3)) in gate_specs.iter().enumerate() {
        let m = nets.len() as u32;
        let a = i1 % m;
        let mut b = i2 % m;
        if b == a {
            b = (a + 1) % m;
        }
        let kind = match kind % 4 {
            0 => GateKind::And,
            1 => GateKind::Or,
            2 => GateKind::Muller,
            _ => GateKind::Buf,
        };
        let mut inputs = vec![nets[a as usize].clone()];
        if kind != GateKind::Buf {
            inputs.push(nets[b as usize].clone());
            let c = i3 % m;
            if i3 % 3 == 0 && c != a && c != b {
                inputs.push(nets[c as usize].clone());
            }
        }
        let out = format!("n{g}");
        gates.push(Gate {
            id: format!("g{g}"),
            kind,
            inputs,
            output: out.clone(),
            has_reset: false,
        });
        nets.push(out);
    }
    let nets = nets
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let (l, p, s) = caps[i % caps.len()];
            Net::new(&id, l, p, s)
        })
        .collect();
    let netlist = Netlist {
        gates,
        nets,
        channels: chans,
        inputs: (0..channels).map(|c| format!("x{c}")).collect(),
        outputs: Vec::new(),
        reset_net: None,
    };
    let mut inputs = Assignment::default();
    for (c, &v) in values.iter().enumerate().take(channels) {
        inputs.insert(&format!("x{c}"), Codeword::data(2, v as usize));
    }
    MonotoneCase { netlist, inputs }
}

pub fn monotone_case() -> impl Strategy<Value = MonotoneCase> {
    (1usize..5, 1usize..14).prop_flat_map(|(channels, n_gates)| {
        (
            Just(channels),
            prop::collection::vec(
                (any::<u8>(), any::<u32>(), any::<u32>(), any::<u32>()),
                n_gates,
            ),
            prop::collection::vec((0.5f64..40.0, 0.0f64..5.0, 0.0f64..2.0), 1..8),
            prop::collection::vec(any::<bool>(), channels),
        )
            .prop_map(|(c, g, caps, v)| build_monotone(c, &g, &caps, &v))
    })
}

/// XOR value of a DimsXor plaintext under key bit 0.
pub fn xor_output(pt: u8, key: u8) -> bool {
    ((pt ^ (pt >> 1) ^ key) & 1) == 1
}

/// Exhaustive XOR bias `A(c=0) - A(c=1)` for `netlist` (a DIMS XOR).
pub fn simulated_xor_bias(netlist: &Netlist) -> (Vec<f64>, usize) {
    let sim = Simulator::new(netlist, SimConfig::default()).unwrap();
    let pts = Target::DimsXor.exhaustive_plaintexts();
    let m = sim
        .collect_traces(&pts, 0, Target::DimsXor, 0.0, 0)
        .unwrap();
    let d: Vec<bool> = pts.iter().map(|&p| xor_output(p, 0)).collect();
    let (s0, s1) = dpa::partition(&m, &d).unwrap();
    let t = dpa::bias(&dpa::average(&s0).unwrap(), &dpa::average(&s1).unwrap()).unwrap();
    (t, m.eval_samples)
}

pub fn global_max(signal: &[f64]) -> f64 {
    signal.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Lobes of each half at 50% of the global maximum.
pub fn half_lobes(signal: &[f64], eval_samples: usize) -> (Vec<Lobe>, Vec<Lobe>) {
    let thr = 0.5 * global_max(signal);
    let (e, r) = signal.split_at(eval_samples);
    (dpa::lobes(e, thr), dpa::lobes(r, thr))
}

pub fn signs(lobes: &[Lobe]) -> String {
    lobes
        .iter()
        .map(|l| if l.peak > 0.0 { '+' } else { '-' })
        .collect()
}
