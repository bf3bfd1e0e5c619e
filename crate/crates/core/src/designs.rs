// SPDX-License-Identifier: Apache-2.0

//! Builtin designs: the DIMS dual-rail XOR and an 8-slice AddRoundKey bank.
//!
//! One XOR slice is four logical levels deep:
//!
//! ```text
//! level 1  M1 = C(a0,b0)  M2 = C(a1,b1)  M3 = C(a0,b1)  M4 = C(a1,b0)
//! level 2  O1 = OR(m1,m2) -> s0          O2 = OR(m3,m4) -> s1
//! level 3  H1 = Cr(s0,en) -> c0          H2 = Cr(s1,en) -> c1
//! level 4  N1 = NOR(c0,c1) -> ack
//! ```
//!
//! `en` is the receiver's enable (idle high, dropped once the output has
//! been consumed) and `ack` is the active-low acknowledge returned to the
//! input channels. Any valid input pair switches exactly one gate per level
//! in each phase.

use std::fmt;
use std::str::FromStr;

use crate::current::XorCaps;
use crate::netlist::{Channel, Gate, GateKind, Net, Netlist};
use crate::{Error, Result};

/// Default per-net components (C_l, C_par, C_sc) in fF.
pub const DEFAULT_C_LOAD_FF: f64 = 8.0;
pub const DEFAULT_C_PAR_FF: f64 = 1.0;
pub const DEFAULT_C_SC_FF: f64 = 0.5;

pub const RESET_NET: &str = "rst";

fn net(id: String) -> Net {
    Net {
        id,
        c_load_ff: DEFAULT_C_LOAD_FF,
        c_par_ff: DEFAULT_C_PAR_FF,
        c_sc_ff: DEFAULT_C_SC_FF,
    }
}

struct Slice {
    gates: Vec<Gate>,
    nets: Vec<Net>,
    channels: Vec<Channel>,
}

/// One DIMS XOR slice. `tag` suffixes every internal id; channel rails are
/// `{a}0`, `{a}1` etc.
fn dims_xor_slice(a: &str, b: &str, c: &str, tag: &str) -> Slice {
    let n = |base: &str| format!("{base}{tag}");
    let rail = |ch: &str, r: u8| format!("{ch}{r}");
    let (a0, a1, b0, b1) = (rail(a, 0), rail(a, 1), rail(b, 0), rail(b, 1));
    let (c0, c1) = (rail(c, 0), rail(c, 1));
    let (m1, m2, m3, m4) = (n("m1"), n("m2"), n("m3"), n("m4"));
    let (s0, s1) = (n("s0"), n("s1"));
    let (ack, en) = (n("ack"), n("en"));

    let muller = |id: &str, x: &str, y: &str, out: &str| Gate {
        id: n(id),
        kind: GateKind::Muller,
        inputs: vec![x.to_string(), y.to_string()],
        output: out.to_string(),
        has_reset: false,
    };
    let gates = vec![
        muller("M1", &a0, &b0, &m1),
        muller("M2", &a1, &b1, &m2),
        muller("M3", &a0, &b1, &m3),
        muller("M4", &a1, &b0, &m4),
        Gate {
            id: n("O1"),
            kind: GateKind::Or,
            inputs: vec![m1.clone(), m2.clone()],
            output: s0.clone(),
            has_reset: false,
        },
        Gate {
            id: n("O2"),
            kind: GateKind::Or,
            inputs: vec![m3.clone(), m4.clone()],
            output: s1.clone(),
            has_reset: false,
        },
        muller("H1", &s0, &en, &c0).with_reset(),
        muller("H2", &s1, &en, &c1).with_reset(),
        Gate {
            id: n("N1"),
            kind: GateKind::Nor,
            inputs: vec![c0.clone(), c1.clone()],
            output: ack.clone(),
            has_reset: false,
        },
    ];
    let nets = [
        &a0, &a1, &b0, &b1, &m1, &m2, &m3, &m4, &s0, &s1, &c0, &c1, &ack, &en,
    ]
    .into_iter()
    .map(|id| net(id.clone()))
    .collect();
    let channels = vec![
        Channel {
            name: a.trim_end_matches('_').to_string(),
            rails: vec![a0, a1],
            ack: Some(ack.clone()),
        },
        Channel {
            name: b.trim_end_matches('_').to_string(),
            rails: vec![b0, b1],
            ack: Some(ack),
        },
        Channel {
            name: c.trim_end_matches('_').to_string(),
            rails: vec![c0, c1],
            ack: Some(en),
        },
    ];
    Slice {
        gates,
        nets,
        channels,
    }
}

/// The canonical dual-rail XOR `c = a ^ b` with its handshake stage.
pub fn builtin_dims_xor() -> Netlist {
    let slice = dims_xor_slice("a", "b", "c", "");
    let mut nets = slice.nets;
    nets.push(net(RESET_NET.to_string()));
    Netlist {
        gates: slice.gates,
        nets,
        channels: slice.channels,
        inputs: vec!["a".into(), "b".into()],
        outputs: vec!["c".into()],
        reset_net: Some(RESET_NET.into()),
    }
}

/// Number of XOR slices in [`builtin_add_round_key`].
pub const ADD_ROUND_KEY_BITS: usize = 8;

/// Byte-wide AddRoundKey: slice `i` computes `c{i} = p{i} ^ k{i}`.
///
/// Channels are `p0..p7` (plaintext), `k0..k7` (key) and `c0..c7`; rails of
/// channel `pN` are `pN_0`, `pN_1`.
pub fn builtin_add_round_key() -> Netlist {
    let mut gates = Vec::new();
    let mut nets = Vec::new();
    let mut channels = Vec::new();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for i in 0..ADD_ROUND_KEY_BITS {
        let slice = dims_xor_slice(
            &format!("p{i}_"),
            &format!("k{i}_"),
            &format!("c{i}_"),
            &format!("_{i}"),
        );
        gates.extend(slice.gates);
        nets.extend(slice.nets);
        channels.extend(slice.channels);
        inputs.push(format!("p{i}"));
        inputs.push(format!("k{i}"));
        outputs.push(format!("c{i}"));
    }
    nets.push(net(RESET_NET.to_string()));
    Netlist {
        gates,
        nets,
        channels,
        inputs,
        outputs,
        reset_net: Some(RESET_NET.into()),
    }
}

/// Gate id at logical position (level, index) of the builtin XOR: level 1 is
/// numbered M1..M4, the other levels left to right.
pub fn xor_gate_at(level: u8, index: u8) -> Option<&'static str> {
    Some(match (level, index) {
        (1, 1) => "M1",
        (1, 2) => "M2",
        (1, 3) => "M3",
        (1, 4) => "M4",
        (2, 1) => "O1",
        (2, 2) => "O2",
        (3, 1) => "H1",
        (3, 2) => "H2",
        (4, 1) => "N1",
        _ => return None,
    })
}

/// All (level, index) positions of the builtin XOR.
pub const XOR_POSITIONS: [(u8, u8); 9] = [
    (1, 1),
    (1, 2),
    (1, 3),
    (1, 4),
    (2, 1),
    (2, 2),
    (3, 1),
    (3, 2),
    (4, 1),
];

/// Output net of the gate at (level, index) for an XOR slice tagged `tag`
/// (empty for [`builtin_dims_xor`], `_i` for slice `i` of the AddRoundKey bank).
pub fn xor_output_net(netlist: &Netlist, level: u8, index: u8, tag: &str) -> Option<String> {
    let id = format!("{}{tag}", xor_gate_at(level, index)?);
    netlist.gate(&id).map(|g| g.output.clone())
}

/// What a [`Perturbation`] scales.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PerturbTarget {
    /// Output net of the XOR gate at (level, index), written `c_l31`.
    Position(u8, u8),
    /// A net by id.
    Net(String),
}

/// Multiplies the load capacitance of one net, e.g. `c_l31=2x` or `c0=1.5x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub target: PerturbTarget,
    pub factor: f64,
}

impl FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Input(format!("perturbation `{s}`: {why}"));
        let (lhs, rhs) = s
            .split_once('=')
            .ok_or_else(|| bad("expected <target>=<factor>x"))?;
        let factor: f64 = rhs
            .trim()
            .trim_end_matches(['x', 'X'])
            .parse()
            .map_err(|_| bad("factor is not a number"))?;
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(bad("factor must be > 0"));
        }
        let lhs = lhs.trim();
        let target = match lhs.strip_prefix("c_l") {
            Some(pos) => {
                let digits: Vec<u8> = pos
                    .chars()
                    .map(|c| c.to_digit(10).map(|d| d as u8))
                    .collect::<Option<_>>()
                    .ok_or_else(|| bad("position must be two digits, level then index"))?;
                match digits[..] {
                    [level, index] if xor_gate_at(level, index).is_some() => {
                        PerturbTarget::Position(level, index)
                    }
                    _ => return Err(bad("no XOR gate at that position")),
                }
            }
            None if !lhs.is_empty() => PerturbTarget::Net(lhs.to_string()),
            None => return Err(bad("empty target")),
        };
        Ok(Perturbation { target, factor })
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.target {
            PerturbTarget::Position(l, i) => write!(f, "c_l{l}{i}={}x", self.factor),
            PerturbTarget::Net(n) => write!(f, "{n}={}x", self.factor),
        }
    }
}

impl Perturbation {
    /// Scales the target's `c_load`. Positions resolve in the XOR slice
    /// tagged `tag`.
    pub fn apply(&self, netlist: &mut Netlist, tag: &str) -> Result<()> {
        let id = match &self.target {
            PerturbTarget::Position(l, i) => {
                xor_output_net(netlist, *l, *i, tag).ok_or_else(|| {
                    Error::Input(format!("`{self}` does not resolve in this netlist"))
                })?
            }
            PerturbTarget::Net(n) => n.clone(),
        };
        let net = netlist
            .net_mut(&id)
            .ok_or_else(|| Error::Input(format!("`{self}`: unknown net `{id}`")))?;
        net.c_load_ff *= self.factor;
        Ok(())
    }
}

/// Total capacitance at every XOR position of slice `tag`.
pub fn xor_caps(netlist: &Netlist, tag: &str) -> Result<XorCaps> {
    XOR_POSITIONS
        .iter()
        .map(|&(l, i)| {
            let net = xor_output_net(netlist, l, i, tag)
                .and_then(|id| netlist.net(&id))
                .ok_or(Error::MissingCapacitance { level: l, index: i })?;
            Ok(((l, i), net.total_capacitance()))
        })
        .collect()
}
