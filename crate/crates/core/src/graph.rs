// SPDX-License-Identifier: Apache-2.0

//! The annotated directed graph G(V, E) of a netlist.
//!
//! Vertices are gates, edges are driver to sink net connections carrying the
//! net's total capacitance. Undriven nets and unread outputs form the dotted
//! block boundary and are kept as pseudo-vertices outside the graph proper.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use petgraph::algo::toposort;
use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::visit::EdgeRef;
use petgraph::Direction;
use serde::Serialize;

use crate::netlist::{find_cycle, Assignment, Codeword, GateKind, Indexed, Netlist};
use crate::sim::eval_gate;
use crate::{Error, Result};

/// Enumeration cap for [`verify_balance`].
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 16;

#[derive(Debug, Clone, Serialize)]
pub struct Vertex {
    pub id: String,
    pub kind: GateKind,
    pub level: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Edge {
    pub net: String,
    #[serde(rename = "c_total_fF")]
    pub c_total_ff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryPin {
    pub net: String,
    pub gates: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CircuitGraph {
    netlist: Netlist,
    pub(crate) index: Indexed,
    graph: DiGraph<Vertex, Edge>,
    /// Gate indices in topological order.
    order: Vec<usize>,
    pub boundary_inputs: Vec<BoundaryPin>,
    pub boundary_outputs: Vec<BoundaryPin>,
}

/// Build G(V, E) from a netlist; edges follow driver to sink connectivity.
pub fn build_graph(netlist: &Netlist) -> Result<CircuitGraph> {
    let report = crate::netlist::validate(netlist);
    if let Some(cycle) = find_cycle(netlist) {
        return Err(Error::Cycle(cycle));
    }
    if !report.is_empty() {
        return Err(Error::Invalid(report));
    }
    let index = Indexed::new(netlist);
    let mut graph = DiGraph::new();
    let nodes: Vec<NodeIndex> = netlist
        .gates
        .iter()
        .map(|g| {
            graph.add_node(Vertex {
                id: g.id.clone(),
                kind: g.kind,
                level: 0,
            })
        })
        .collect();
    for (gi, ins) in index.gate_inputs.iter().enumerate() {
        let mut seen = Vec::new();
        for &net in ins {
            if seen.contains(&net) {
                continue;
            }
            seen.push(net);
            if let Some(d) = index.driver[net] {
                graph.add_edge(
                    nodes[d],
                    nodes[gi],
                    Edge {
                        net: index.net_ids[net].clone(),
                        c_total_ff: index.total_cap[net],
                    },
                );
            }
        }
    }
    let order = toposort(&graph, None)
        .map_err(|c| Error::Cycle(vec![graph[c.node_id()].id.clone()]))?
        .into_iter()
        .map(|n| n.index())
        .collect();

    let gate_ids = |net: usize| -> Vec<String> {
        index.sinks[net]
            .iter()
            .map(|&g| netlist.gates[g].id.clone())
            .collect()
    };
    let mut boundary_inputs = Vec::new();
    let mut boundary_outputs = Vec::new();
    for net in 0..index.net_ids.len() {
        if Some(net) == index.reset {
            continue;
        }
        match index.driver[net] {
            None if !index.sinks[net].is_empty() => boundary_inputs.push(BoundaryPin {
                net: index.net_ids[net].clone(),
                gates: gate_ids(net),
            }),
            Some(d) if index.sinks[net].is_empty() => boundary_outputs.push(BoundaryPin {
                net: index.net_ids[net].clone(),
                gates: vec![netlist.gates[d].id.clone()],
            }),
            _ => {}
        }
    }

    let mut g = CircuitGraph {
        netlist: netlist.clone(),
        index,
        graph,
        order,
        boundary_inputs,
        boundary_outputs,
    };
    g.assign_levels();
    Ok(g)
}

/// Assign `level = 1 + max(level of predecessors)`; boundary inputs sit at 0.
pub fn levelize(mut graph: CircuitGraph) -> CircuitGraph {
    graph.assign_levels();
    graph
}

impl CircuitGraph {
    fn assign_levels(&mut self) {
        for &gi in &self.order {
            let node = NodeIndex::new(gi);
            let level = self
                .graph
                .neighbors_directed(node, Direction::Incoming)
                .map(|p| self.graph[p].level)
                .max()
                .unwrap_or(0)
                + 1;
            self.graph[node].level = level;
        }
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.graph.node_weights()
    }

    /// (driver gate, sink gate, edge annotation).
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, &Edge)> {
        self.graph.edge_references().map(|e| {
            (
                self.graph[e.source()].id.as_str(),
                self.graph[e.target()].id.as_str(),
                e.weight(),
            )
        })
    }

    pub fn level(&self, gate: &str) -> Option<u32> {
        self.vertices().find(|v| v.id == gate).map(|v| v.level)
    }

    pub(crate) fn level_of(&self, gate_index: usize) -> u32 {
        self.graph[NodeIndex::new(gate_index)].level
    }

    /// N_c: the deepest level, i.e. the number of gates on the critical path.
    pub fn critical_depth(&self) -> u32 {
        self.vertices().map(|v| v.level).max().unwrap_or(0)
    }

    /// Quiescent state at cycle start: input rails low, receiver enables
    /// high, MULLER state 0, combinational gates settled.
    pub(crate) fn reset_values(&self) -> Vec<bool> {
        let mut v = vec![false; self.index.net_ids.len()];
        for ch in self.netlist.output_channels() {
            if let Some(ack) = &ch.ack {
                let a = self.index.net(ack);
                if self.index.driver[a].is_none() {
                    v[a] = true;
                }
            }
        }
        self.settle(&mut v, None);
        v
    }

    /// Zero-delay evaluation in topological order. `prev` supplies the
    /// state-holding value for MULLER gates (defaults to the current value).
    fn settle(&self, v: &mut [bool], prev: Option<&[bool]>) {
        let mut buf = Vec::new();
        for &gi in &self.order {
            let gate = &self.netlist.gates[gi];
            buf.clear();
            buf.extend(self.index.gate_inputs[gi].iter().map(|&n| v[n]));
            let out = self.index.gate_output[gi];
            let held = prev.map_or(v[out], |p| p[out]);
            v[out] = eval_gate(gate.kind, &buf, held);
        }
    }

    /// Apply an assignment's rails onto a copy of the reset state.
    fn apply(&self, base: &[bool], inputs: &Assignment) -> Vec<bool> {
        let mut v = base.to_vec();
        for ch in self.netlist.input_channels() {
            if let Some(code) = inputs.get(&ch.name) {
                for (rail, &bit) in ch.rails.iter().zip(&code.0) {
                    v[self.index.net(rail)] = bit;
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchingProfile {
    /// Levels on the critical path of the block.
    pub n_c: u32,
    /// Gate transitions in one phase.
    pub n_i: usize,
    /// Level to switching gates; `levels[l].len()` is N_lj.
    pub levels: BTreeMap<u32, Vec<String>>,
}

impl SwitchingProfile {
    /// Level to number of switching gates.
    pub fn shape(&self) -> BTreeMap<u32, usize> {
        self.levels.iter().map(|(l, g)| (*l, g.len())).collect()
    }
}

/// Gates that switch during the evaluation phase for `inputs`, by level.
pub fn switching_profile(graph: &CircuitGraph, inputs: &Assignment) -> Result<SwitchingProfile> {
    inputs.check_inputs(&graph.netlist)?;
    let reset = graph.reset_values();
    let mut v = graph.apply(&reset, inputs);
    graph.settle(&mut v, Some(&reset));
    let mut levels: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    let mut n_i = 0;
    for (gi, gate) in graph.netlist.gates.iter().enumerate() {
        let out = graph.index.gate_output[gi];
        if v[out] != reset[out] {
            n_i += 1;
            levels
                .entry(graph.level_of(gi))
                .or_default()
                .push(gate.id.clone());
        }
    }
    Ok(SwitchingProfile {
        n_c: graph.critical_depth(),
        n_i,
        levels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub balanced: bool,
    pub combinations: u64,
    /// N_i when it is the same for every input, else `None`.
    pub n_i: Option<usize>,
    /// Per-level N_ij of the first enumerated input.
    pub reference_shape: BTreeMap<u32, usize>,
    /// Inputs whose profile differs from the reference, as channel values.
    pub offending: Vec<BTreeMap<String, usize>>,
}

/// Exhaustively compare switching profiles over every input codeword.
pub fn verify_balance(graph: &CircuitGraph) -> Result<BalanceReport> {
    verify_balance_capped(graph, DEFAULT_ENUMERATION_CAP)
}

pub fn verify_balance_capped(graph: &CircuitGraph, cap: u64) -> Result<BalanceReport> {
    let channels: Vec<_> = graph.netlist.input_channels().collect();
    let combinations: u128 = channels.iter().map(|c| c.arity() as u128).product();
    if combinations > cap as u128 {
        return Err(Error::Capacity { combinations, cap });
    }
    let combinations = combinations as u64;
    let mut reference: Option<(usize, BTreeMap<u32, usize>)> = None;
    let mut n_i_uniform = true;
    let mut offending = Vec::new();
    let mut digits = vec![0usize; channels.len()];
    for _ in 0..combinations {
        let mut assignment = Assignment::default();
        for (ch, &d) in channels.iter().zip(&digits) {
            assignment.insert(&ch.name, Codeword::data(ch.arity(), d));
        }
        let profile = switching_profile(graph, &assignment)?;
        let shape = profile.shape();
        match &reference {
            None => reference = Some((profile.n_i, shape)),
            Some((n_i, ref_shape)) => {
                if profile.n_i != *n_i {
                    n_i_uniform = false;
                }
                if profile.n_i != *n_i || shape != *ref_shape {
                    offending.push(
                        channels
                            .iter()
                            .zip(&digits)
                            .map(|(c, &d)| (c.name.clone(), d))
                            .collect(),
                    );
                }
            }
        }
        // mixed-radix increment, first channel fastest
        for (d, ch) in digits.iter_mut().zip(&channels) {
            *d += 1;
            if *d < ch.arity() {
                break;
            }
            *d = 0;
        }
    }
    let (n_i, reference_shape) = reference.unwrap_or((0, BTreeMap::new()));
    Ok(BalanceReport {
        balanced: offending.is_empty(),
        combinations,
        n_i: n_i_uniform.then_some(n_i),
        reference_shape,
        offending,
    })
}

#[derive(Serialize)]
struct GraphExport<'a> {
    schema_version: u32,
    n_c: u32,
    vertices: Vec<&'a Vertex>,
    edges: Vec<ExportEdge<'a>>,
    boundary_inputs: &'a [BoundaryPin],
    boundary_outputs: &'a [BoundaryPin],
}

#[derive(Serialize)]
struct ExportEdge<'a> {
    from: &'a str,
    to: &'a str,
    net: &'a str,
    #[serde(rename = "c_total_fF")]
    c_total_ff: f64,
}

impl CircuitGraph {
    pub fn to_json_value(&self) -> serde_json::Value {
        let export = GraphExport {
            schema_version: crate::SCHEMA_VERSION,
            n_c: self.critical_depth(),
            vertices: self.vertices().collect(),
            edges: self
                .edges()
                .map(|(from, to, e)| ExportEdge {
                    from,
                    to,
                    net: &e.net,
                    c_total_ff: e.c_total_ff,
                })
                .collect(),
            boundary_inputs: &self.boundary_inputs,
            boundary_outputs: &self.boundary_outputs,
        };
        serde_json::to_value(export).expect("graph export serializes")
    }

    /// Graphviz rendering; boundary connections are dotted.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph G {\n  rankdir=LR;\n");
        for v in self.vertices() {
            let _ = writeln!(
                s,
                "  \"{}\" [label=\"{}\\n{} L{}\"];",
                v.id, v.id, v.kind, v.level
            );
        }
        for (from, to, e) in self.edges() {
            let _ = writeln!(
                s,
                "  \"{from}\" -> \"{to}\" [label=\"{} {:.2} fF\"];",
                e.net, e.c_total_ff
            );
        }
        for pin in &self.boundary_inputs {
            let _ = writeln!(s, "  \"in:{}\" [shape=point];", pin.net);
            for g in &pin.gates {
                let _ = writeln!(
                    s,
                    "  \"in:{}\" -> \"{g}\" [style=dotted,label=\"{}\"];",
                    pin.net, pin.net
                );
            }
        }
        for pin in &self.boundary_outputs {
            let _ = writeln!(s, "  \"out:{}\" [shape=point];", pin.net);
            for g in &pin.gates {
                let _ = writeln!(
                    s,
                    "  \"{g}\" -> \"out:{}\" [style=dotted,label=\"{}\"];",
                    pin.net, pin.net
                );
            }
        }
        s.push_str("}\n");
        s
    }
}
