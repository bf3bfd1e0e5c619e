// SPDX-License-Identifier: Apache-2.0

//! Gate-level netlist: gates, capacitance-annotated nets and 1-of-N channels.
//!
//! The on-disk form is a JSON document:
//!
//! ```json
//! {
//!   "gates":    [{"id": "M1", "kind": "MULLER", "inputs": ["a0", "b0"], "output": "m1"}],
//!   "nets":     [{"id": "a0", "c_load_fF": 8.0, "c_par_fF": 1.0, "c_sc_fF": 0.5}],
//!   "channels": [{"name": "a", "rails": ["a0", "a1"], "ack": "ack"}],
//!   "inputs":   ["a"],
//!   "outputs":  [],
//!   "reset_net": "rst"
//! }
//! ```
//!
//! Unknown keys are rejected. Capacitances are femtofarads.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    /// n-input C-element.
    Muller,
    Nor,
    Or,
    And,
    Inv,
    Buf,
}

impl GateKind {
    pub fn is_stateful(self) -> bool {
        self == GateKind::Muller
    }

    pub fn accepts_arity(self, n: usize) -> bool {
        match self {
            GateKind::Inv | GateKind::Buf => n == 1,
            _ => n >= 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Muller => "MULLER",
            GateKind::Nor => "NOR",
            GateKind::Or => "OR",
            GateKind::And => "AND",
            GateKind::Inv => "INV",
            GateKind::Buf => "BUF",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub id: String,
    pub kind: GateKind,
    pub inputs: Vec<String>,
    pub output: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub has_reset: bool,
}

impl Gate {
    pub fn new(id: &str, kind: GateKind, inputs: &[&str], output: &str) -> Self {
        Gate {
            id: id.to_string(),
            kind,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            output: output.to_string(),
            has_reset: false,
        }
    }

    pub fn with_reset(mut self) -> Self {
        self.has_reset = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Net {
    pub id: String,
    /// Gate-pin plus routing capacitance.
    #[serde(rename = "c_load_fF")]
    pub c_load_ff: f64,
    #[serde(rename = "c_par_fF")]
    pub c_par_ff: f64,
    /// Lumped short-circuit equivalent capacitance.
    #[serde(rename = "c_sc_fF")]
    pub c_sc_ff: f64,
}

impl Net {
    pub fn new(id: &str, c_load_ff: f64, c_par_ff: f64, c_sc_ff: f64) -> Self {
        Net {
            id: id.to_string(),
            c_load_ff,
            c_par_ff,
            c_sc_ff,
        }
    }

    /// C = C_l + C_par + C_sc, in fF.
    pub fn total_capacitance(&self) -> f64 {
        self.c_load_ff + self.c_par_ff + self.c_sc_ff
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub name: String,
    /// Rail `i` high encodes value `i`.
    pub rails: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ack: Option<String>,
}

impl Channel {
    /// N of the 1-of-N code.
    pub fn arity(&self) -> usize {
        self.rails.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Netlist {
    pub gates: Vec<Gate>,
    pub nets: Vec<Net>,
    pub channels: Vec<Channel>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset_net: Option<String>,
}

impl Netlist {
    pub fn net(&self, id: &str) -> Option<&Net> {
        self.nets.iter().find(|n| n.id == id)
    }

    pub fn net_mut(&mut self, id: &str) -> Option<&mut Net> {
        self.nets.iter_mut().find(|n| n.id == id)
    }

    pub fn gate(&self, id: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.id == id)
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn input_channels(&self) -> impl Iterator<Item = &Channel> {
        self.inputs.iter().filter_map(|n| self.channel(n))
    }

    pub fn output_channels(&self) -> impl Iterator<Item = &Channel> {
        self.outputs.iter().filter_map(|n| self.channel(n))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("netlist serialization is infallible")
    }

    /// Deserialize without validating.
    pub fn from_json_unchecked(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

/// Parse and validate a netlist document.
pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let netlist = Netlist::from_json_unchecked(text)?;
    let report = validate(&netlist);
    if report.is_empty() {
        Ok(netlist)
    } else {
        Err(Error::Invalid(report))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    DuplicateGate {
        id: String,
    },
    DuplicateNet {
        id: String,
    },
    DuplicateChannel {
        name: String,
    },
    UndeclaredNet {
        owner: String,
        net: String,
    },
    UnknownChannel {
        name: String,
    },
    Arity {
        gate: String,
        kind: GateKind,
        inputs: usize,
    },
    ResetOnCombinational {
        gate: String,
    },
    MultipleDrivers {
        net: String,
        drivers: Vec<String>,
    },
    DuplicateRail {
        channel: String,
        net: String,
    },
    TooFewRails {
        channel: String,
        rails: usize,
    },
    BadCapacitance {
        net: String,
        field: &'static str,
        value: f64,
    },
    ZeroCapacitance {
        net: String,
    },
    CombinationalCycle {
        gates: Vec<String>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateGate { id } => write!(f, "duplicate gate id `{id}`"),
            Violation::DuplicateNet { id } => write!(f, "duplicate net id `{id}`"),
            Violation::DuplicateChannel { name } => write!(f, "duplicate channel `{name}`"),
            Violation::UndeclaredNet { owner, net } => {
                write!(f, "`{owner}` references undeclared net `{net}`")
            }
            Violation::UnknownChannel { name } => write!(f, "unknown channel `{name}`"),
            Violation::Arity { gate, kind, inputs } => {
                write!(f, "gate `{gate}`: {kind} cannot take {inputs} input(s)")
            }
            Violation::ResetOnCombinational { gate } => {
                write!(f, "gate `{gate}`: only MULLER gates may have a reset")
            }
            Violation::MultipleDrivers { net, drivers } => {
                write!(f, "multiple drivers on net `{net}`: {}", drivers.join(", "))
            }
            Violation::DuplicateRail { channel, net } => {
                write!(f, "duplicate rail `{net}` in channel `{channel}`")
            }
            Violation::TooFewRails { channel, rails } => {
                write!(
                    f,
                    "channel `{channel}` has {rails} rail(s), needs at least 2"
                )
            }
            Violation::BadCapacitance { net, field, value } => {
                write!(
                    f,
                    "net `{net}`: {field} = {value} is not a finite non-negative value"
                )
            }
            Violation::ZeroCapacitance { net } => {
                write!(f, "driven net `{net}` has zero total capacitance")
            }
            Violation::CombinationalCycle { gates } => {
                write!(f, "combinational cycle through {}", gates.join(" -> "))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check every structural invariant; violations are collected, not raised.
pub fn validate(netlist: &Netlist) -> ValidationReport {
    let mut out = Vec::new();

    let mut net_ids = HashSet::new();
    for net in &netlist.nets {
        if !net_ids.insert(net.id.as_str()) {
            out.push(Violation::DuplicateNet { id: net.id.clone() });
        }
        for (field, value) in [
            ("c_load_fF", net.c_load_ff),
            ("c_par_fF", net.c_par_ff),
            ("c_sc_fF", net.c_sc_ff),
        ] {
            if !value.is_finite() || value < 0.0 {
                out.push(Violation::BadCapacitance {
                    net: net.id.clone(),
                    field,
                    value,
                });
            }
        }
    }

    let mut gate_ids = HashSet::new();
    let mut drivers: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for gate in &netlist.gates {
        if !gate_ids.insert(gate.id.as_str()) {
            out.push(Violation::DuplicateGate {
                id: gate.id.clone(),
            });
        }
        if !gate.kind.accepts_arity(gate.inputs.len()) {
            out.push(Violation::Arity {
                gate: gate.id.clone(),
                kind: gate.kind,
                inputs: gate.inputs.len(),
            });
        }
        if gate.has_reset && !gate.kind.is_stateful() {
            out.push(Violation::ResetOnCombinational {
                gate: gate.id.clone(),
            });
        }
        for net in gate.inputs.iter().chain(std::iter::once(&gate.output)) {
            if !net_ids.contains(net.as_str()) {
                out.push(Violation::UndeclaredNet {
                    owner: gate.id.clone(),
                    net: net.clone(),
                });
            }
        }
        drivers
            .entry(gate.output.as_str())
            .or_default()
            .push(gate.id.clone());
    }
    for (net, ds) in &drivers {
        if ds.len() > 1 {
            out.push(Violation::MultipleDrivers {
                net: net.to_string(),
                drivers: ds.clone(),
            });
        }
        if let Some(n) = netlist.net(net) {
            if n.total_capacitance() <= 0.0 {
                out.push(Violation::ZeroCapacitance { net: n.id.clone() });
            }
        }
    }

    let mut channel_names = HashSet::new();
    for ch in &netlist.channels {
        if !channel_names.insert(ch.name.as_str()) {
            out.push(Violation::DuplicateChannel {
                name: ch.name.clone(),
            });
        }
        if ch.rails.len() < 2 {
            out.push(Violation::TooFewRails {
                channel: ch.name.clone(),
                rails: ch.rails.len(),
            });
        }
        let mut seen = HashSet::new();
        for rail in &ch.rails {
            if !seen.insert(rail.as_str()) {
                out.push(Violation::DuplicateRail {
                    channel: ch.name.clone(),
                    net: rail.clone(),
                });
            }
        }
        for net in ch.rails.iter().chain(ch.ack.iter()) {
            if !net_ids.contains(net.as_str()) {
                out.push(Violation::UndeclaredNet {
                    owner: ch.name.clone(),
                    net: net.clone(),
                });
            }
        }
    }
    for name in netlist.inputs.iter().chain(&netlist.outputs) {
        if !channel_names.contains(name.as_str()) {
            out.push(Violation::UnknownChannel { name: name.clone() });
        }
    }
    if let Some(rst) = &netlist.reset_net {
        if !net_ids.contains(rst.as_str()) {
            out.push(Violation::UndeclaredNet {
                owner: "reset_net".into(),
                net: rst.clone(),
            });
        }
    }

    if let Some(cycle) = find_cycle(netlist) {
        out.push(Violation::CombinationalCycle { gates: cycle });
    }

    ValidationReport { violations: out }
}

/// Gate-level cycle through net connectivity, if any.
pub(crate) fn find_cycle(netlist: &Netlist) -> Option<Vec<String>> {
    let driver: HashMap<&str, usize> = netlist
        .gates
        .iter()
        .enumerate()
        .map(|(i, g)| (g.output.as_str(), i))
        .collect();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; netlist.gates.len()];
    let mut stack_path = Vec::new();
    for start in 0..netlist.gates.len() {
        if color[start] != 0 {
            continue;
        }
        // iterative DFS over predecessors
        let mut stack = vec![(start, 0usize)];
        color[start] = 1;
        stack_path.push(start);
        while let Some((g, next)) = stack.last_mut() {
            let gate = &netlist.gates[*g];
            if *next < gate.inputs.len() {
                let input = &gate.inputs[*next];
                *next += 1;
                if let Some(&pred) = driver.get(input.as_str()) {
                    match color[pred] {
                        0 => {
                            color[pred] = 1;
                            stack_path.push(pred);
                            stack.push((pred, 0));
                        }
                        1 => {
                            let pos = stack_path.iter().position(|&x| x == pred).unwrap();
                            let mut cycle: Vec<String> = stack_path[pos..]
                                .iter()
                                .map(|&i| netlist.gates[i].id.clone())
                                .collect();
                            cycle.reverse();
                            return Some(cycle);
                        }
                        _ => {}
                    }
                }
            } else {
                color[*g] = 2;
                stack.pop();
                stack_path.pop();
            }
        }
    }
    None
}

/// Per-channel rail levels. Exactly one high rail is a valid datum, none
/// high is the invalid (spacer) state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Codeword(pub Vec<bool>);

impl Codeword {
    pub fn data(rails: usize, value: usize) -> Self {
        assert!(value < rails, "value {value} out of range for 1-of-{rails}");
        Codeword((0..rails).map(|i| i == value).collect())
    }

    pub fn invalid(rails: usize) -> Self {
        Codeword(vec![false; rails])
    }

    /// `Ok(Some(v))` for a valid datum, `Ok(None)` for the spacer, `Err` for
    /// more than one high rail.
    #[allow(clippy::result_unit_err)]
    pub fn value(&self) -> std::result::Result<Option<usize>, ()> {
        let mut found = None;
        for (i, &r) in self.0.iter().enumerate() {
            if r {
                if found.is_some() {
                    return Err(());
                }
                found = Some(i);
            }
        }
        Ok(found)
    }

    pub fn rails(&self) -> usize {
        self.0.len()
    }
}

/// Input-channel name to codeword.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment(pub BTreeMap<String, Codeword>);

impl Assignment {
    /// Build from data values; rail counts are taken from the netlist.
    pub fn from_values<'a>(
        netlist: &Netlist,
        values: impl IntoIterator<Item = (&'a str, usize)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (name, value) in values {
            let ch = netlist
                .channel(name)
                .ok_or_else(|| Error::Input(format!("unknown channel `{name}`")))?;
            if value >= ch.arity() {
                return Err(Error::Input(format!(
                    "value {value} out of range for 1-of-{} channel `{name}`",
                    ch.arity()
                )));
            }
            map.insert(name.to_string(), Codeword::data(ch.arity(), value));
        }
        Ok(Assignment(map))
    }

    pub fn insert(&mut self, channel: &str, code: Codeword) {
        self.0.insert(channel.to_string(), code);
    }

    pub fn get(&self, channel: &str) -> Option<&Codeword> {
        self.0.get(channel)
    }

    /// Check that every input channel carries a valid datum.
    pub(crate) fn check_inputs(&self, netlist: &Netlist) -> Result<()> {
        for ch in netlist.input_channels() {
            let code = self
                .get(&ch.name)
                .ok_or_else(|| Error::Input(format!("no value for input channel `{}`", ch.name)))?;
            if code.rails() != ch.arity() {
                return Err(Error::Input(format!(
                    "channel `{}` has {} rails, codeword has {}",
                    ch.name,
                    ch.arity(),
                    code.rails()
                )));
            }
            match code.value() {
                Ok(Some(_)) => {}
                Ok(None) => {
                    return Err(Error::Input(format!(
                        "channel `{}`: spacer is not a data value",
                        ch.name
                    )))
                }
                Err(()) => {
                    return Err(Error::Input(format!(
                        "channel `{}`: more than one rail high is not a codeword",
                        ch.name
                    )))
                }
            }
        }
        for name in self.0.keys() {
            if !netlist.inputs.contains(name) {
                return Err(Error::Input(format!("`{name}` is not an input channel")));
            }
        }
        Ok(())
    }
}

/// Dense integer view of a validated netlist.
#[derive(Debug, Clone)]
pub(crate) struct Indexed {
    pub net_ids: Vec<String>,
    pub net_index: HashMap<String, usize>,
    pub total_cap: Vec<f64>,
    pub gate_inputs: Vec<Vec<usize>>,
    pub gate_output: Vec<usize>,
    pub driver: Vec<Option<usize>>,
    pub sinks: Vec<Vec<usize>>,
    pub reset: Option<usize>,
}

impl Indexed {
    pub fn new(netlist: &Netlist) -> Self {
        let net_ids: Vec<String> = netlist.nets.iter().map(|n| n.id.clone()).collect();
        let net_index: HashMap<String, usize> = net_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let total_cap = netlist.nets.iter().map(Net::total_capacitance).collect();
        let mut driver = vec![None; net_ids.len()];
        let mut sinks = vec![Vec::new(); net_ids.len()];
        let mut gate_inputs = Vec::with_capacity(netlist.gates.len());
        let mut gate_output = Vec::with_capacity(netlist.gates.len());
        for (gi, g) in netlist.gates.iter().enumerate() {
            let ins: Vec<usize> = g.inputs.iter().map(|n| net_index[n]).collect();
            for &n in &ins {
                if !sinks[n].contains(&gi) {
                    sinks[n].push(gi);
                }
            }
            let out = net_index[&g.output];
            driver[out] = Some(gi);
            gate_inputs.push(ins);
            gate_output.push(out);
        }
        let reset = netlist.reset_net.as_ref().map(|r| net_index[r]);
        Indexed {
            net_ids,
            net_index,
            total_cap,
            gate_inputs,
            gate_output,
            driver,
            sinks,
            reset,
        }
    }

    pub fn net(&self, id: &str) -> usize {
        self.net_index[id]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::builtin_dims_xor;

    fn minimal() -> &'static str {
        r#"{
            "gates": [{"id": "g1", "kind": "INV", "inputs": ["x"], "output": "y"}],
            "nets": [
                {"id": "x", "c_load_fF": 8, "c_par_fF": 0, "c_sc_fF": 0},
                {"id": "y", "c_load_fF": 8, "c_par_fF": 0, "c_sc_fF": 0}
            ],
            "channels": [],
            "inputs": [],
            "outputs": []
        }"#
    }

    #[test]
    fn parses_minimal_inverter() {
        let n = parse_netlist(minimal()).unwrap();
        assert_eq!(n.gates.len(), 1);
        assert_eq!(n.nets.len(), 2);
    }

    #[test]
    fn undeclared_net_is_named() {
        let text = minimal().replace("\"inputs\": [\"x\"]", "\"inputs\": [\"x9\"]");
        let err = parse_netlist(&text).unwrap_err();
        assert!(err.to_string().contains("x9"), "{err}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_netlist("{\n  \"gates\": [,]\n}").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = minimal().replace("\"outputs\": []", "\"outputs\": [], \"extra\": 1");
        assert!(matches!(parse_netlist(&text), Err(Error::Syntax { .. })));
    }

    #[test]
    fn arity_and_duplicates() {
        let mut n = builtin_dims_xor();
        n.gates[0].inputs.truncate(1);
        let dup = n.gates[1].clone();
        n.gates.push(dup);
        let report = validate(&n);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Arity { .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateGate { .. })));
    }

    #[test]
    fn builtin_xor_is_valid() {
        assert!(validate(&builtin_dims_xor()).is_empty());
    }

    #[test]
    fn multiple_drivers_reported() {
        let mut n = builtin_dims_xor();
        n.gates[1].output = n.gates[0].output.clone();
        let report = validate(&n);
        assert!(report.to_string().contains("multiple drivers"), "{report}");
    }

    #[test]
    fn duplicate_rail_reported() {
        let mut n = builtin_dims_xor();
        n.channels[0].rails[1] = n.channels[0].rails[0].clone();
        let report = validate(&n);
        assert!(report.to_string().contains("duplicate rail"), "{report}");
    }

    #[test]
    fn single_rail_channel_rejected() {
        let mut n = builtin_dims_xor();
        n.channels[0].rails.truncate(1);
        assert!(validate(&n)
            .violations
            .iter()
            .any(|v| matches!(v, Violation::TooFewRails { rails: 1, .. })));
    }

    #[test]
    fn negative_capacitance_rejected() {
        let mut n = builtin_dims_xor();
        n.nets[3].c_par_ff = -1.0;
        assert!(!validate(&n).is_empty());
        n.nets[3].c_par_ff = f64::NAN;
        assert!(!validate(&n).is_empty());
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let mut n = builtin_dims_xor();
        n.gates
            .push(Gate::new("loop", GateKind::And, &["s0", "lp"], "lp"));
        n.nets.push(Net::new("lp", 8.0, 0.0, 0.0));
        assert!(validate(&n)
            .violations
            .iter()
            .any(|v| matches!(v, Violation::CombinationalCycle { .. })));
    }

    #[test]
    fn ids_are_case_sensitive() {
        let mut n = builtin_dims_xor();
        n.nets.push(Net::new("A0", 1.0, 0.0, 0.0));
        assert!(validate(&n).is_empty());
    }

    #[test]
    fn codeword_decoding() {
        assert_eq!(Codeword::data(2, 1).value(), Ok(Some(1)));
        assert_eq!(Codeword::invalid(2).value(), Ok(None));
        assert_eq!(Codeword(vec![true, true]).value(), Err(()));
    }
}
