// SPDX-License-Identifier: Apache-2.0

//! Event-driven four-phase simulation.
//!
//! One cycle is: input rails go valid at t = 0 (phase 1), the block asserts
//! its acknowledge (phase 2, active low), the environment returns the inputs
//! to the spacer after `env_delay_ps` (phase 3), and the acknowledge is
//! released (phase 4). Output channels with an `ack` net get a receiver that
//! drops that enable once the output is valid and raises it once the output
//! is empty again, each after `env_delay_ps`.
//!
//! Every gate output transition emits a current pulse starting at the
//! transition's trigger time; the output itself changes at the mid-rail
//! crossing, `trigger + width / 2`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::current::{self, CurrentPulse, ElectricalParams, Polarity, Waveform};
use crate::graph::{build_graph, CircuitGraph};
use crate::netlist::{Assignment, Codeword, GateKind, Netlist};
use crate::{Error, Result};

/// Next output of a gate. MULLER: all-ones sets, all-zeros clears, anything
/// else holds `prev`.
pub fn eval_gate(kind: GateKind, inputs: &[bool], prev: bool) -> bool {
    match kind {
        GateKind::Muller => {
            if inputs.iter().all(|&x| x) {
                true
            } else if inputs.iter().all(|&x| !x) {
                false
            } else {
                prev
            }
        }
        GateKind::And => inputs.iter().all(|&x| x),
        GateKind::Or => inputs.iter().any(|&x| x),
        GateKind::Nor => !inputs.iter().any(|&x| x),
        GateKind::Inv => !inputs[0],
        GateKind::Buf => inputs[0],
    }
}

/// Dual-rail code of one bit; `None` is the spacer. Rail 0 carries value 0.
pub fn encode_dual_rail(bit: Option<bool>) -> (bool, bool) {
    match bit {
        Some(false) => (true, false),
        Some(true) => (false, true),
        None => (false, false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rise,
    Fall,
}

/// Half of the four-phase cycle an event or pulse belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Half {
    /// Phases 1 and 2.
    Evaluation,
    /// Phases 3 and 4.
    ReturnToZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub time_ps: f64,
    pub net: String,
    pub direction: Direction,
    /// `None` for environment-driven nets.
    pub gate: Option<String>,
    /// Graph level of the driving gate, 0 for the environment.
    pub level: u32,
    pub half: Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPulse {
    pub pulse: CurrentPulse,
    pub half: Half,
    pub gate: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    /// Acknowledge asserted (end of phase 1); `None` without input acks.
    pub ack_ps: Option<f64>,
    /// Spacer launched on the inputs.
    pub rtz_ps: f64,
    /// Last event of the cycle.
    pub done_ps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub params: ElectricalParams,
    /// Environment response time to acknowledge and output changes.
    pub env_delay_ps: f64,
    /// Simulated-time guard against livelock.
    pub horizon_ps: f64,
    pub max_events: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            params: ElectricalParams::default(),
            env_delay_ps: 10.0,
            horizon_ps: 1.0e6,
            max_events: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CycleResult {
    pub waveform: Waveform,
    pub events: Vec<TransitionEvent>,
    pub pulses: Vec<SimPulse>,
    pub phases: PhaseTimes,
    /// Every net and MULLER state equals the cycle-start state.
    pub returned_to_reset: bool,
}

impl CycleResult {
    pub fn gate_events(&self, half: Half) -> impl Iterator<Item = &TransitionEvent> {
        self.events
            .iter()
            .filter(move |e| e.gate.is_some() && e.half == half)
    }
}

#[derive(Debug, Clone, Copy)]
enum Action {
    GateOutput { gate: usize, generation: u64 },
    Drive { net: usize, value: bool },
    LaunchSpacer,
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    rank: usize,
    seq: u64,
    action: Action,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // reversed: BinaryHeap pops the earliest event first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.rank.cmp(&self.rank))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    generation: u64,
    target: bool,
    trigger: f64,
    half: Half,
}

#[derive(Debug, Clone)]
struct Receiver {
    rails: Vec<usize>,
    ack: usize,
}

/// A netlist compiled for repeated simulation. Immutable and shareable
/// across threads.
#[derive(Debug, Clone)]
pub struct Simulator {
    graph: CircuitGraph,
    config: SimConfig,
    reset: Vec<bool>,
    /// Lexicographic position of each net id, for tie-breaking.
    net_rank: Vec<usize>,
    channel_rails: Vec<(String, Vec<usize>)>,
    /// net -> channels that contain it as a rail
    rail_of: Vec<Vec<usize>>,
    input_acks: Vec<usize>,
    is_input_ack: Vec<bool>,
    receivers: Vec<Receiver>,
    receivers_of: Vec<Vec<usize>>,
}

struct RunState {
    values: Vec<bool>,
    pending: Vec<Option<Pending>>,
    generation: Vec<u64>,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    half: Half,
    launched: bool,
    ack_ps: Option<f64>,
    rtz_ps: f64,
    events: Vec<TransitionEvent>,
    pulses: Vec<SimPulse>,
}

impl RunState {
    fn push(&mut self, time: f64, rank: usize, action: Action) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            rank,
            seq: self.seq,
            action,
        });
    }
}

impl Simulator {
    pub fn new(netlist: &Netlist, config: SimConfig) -> Result<Self> {
        config.params.check()?;
        if !(config.env_delay_ps >= 0.0) {
            return Err(Error::Domain("environment delay must be >= 0".into()));
        }
        let graph = build_graph(netlist)?;
        let idx = &graph.index;
        let n_nets = idx.net_ids.len();

        let mut order: Vec<usize> = (0..n_nets).collect();
        order.sort_by(|&a, &b| idx.net_ids[a].cmp(&idx.net_ids[b]));
        let mut net_rank = vec![0; n_nets];
        for (rank, &n) in order.iter().enumerate() {
            net_rank[n] = rank;
        }

        let mut rail_of = vec![Vec::new(); n_nets];
        let channel_rails: Vec<(String, Vec<usize>)> = netlist
            .channels
            .iter()
            .map(|c| (c.name.clone(), c.rails.iter().map(|r| idx.net(r)).collect()))
            .collect();
        for (ci, (_, rails)) in channel_rails.iter().enumerate() {
            for &r in rails {
                rail_of[r].push(ci);
            }
        }

        let mut input_acks = Vec::new();
        for ch in netlist.input_channels() {
            if let Some(ack) = &ch.ack {
                let a = idx.net(ack);
                if !input_acks.contains(&a) {
                    input_acks.push(a);
                }
            }
        }
        let mut is_input_ack = vec![false; n_nets];
        for &a in &input_acks {
            is_input_ack[a] = true;
        }

        let mut receivers = Vec::new();
        let mut receivers_of = vec![Vec::new(); n_nets];
        for ch in netlist.output_channels() {
            if let Some(ack) = &ch.ack {
                let a = idx.net(ack);
                if idx.driver[a].is_none() {
                    let rails: Vec<usize> = ch.rails.iter().map(|r| idx.net(r)).collect();
                    for &r in &rails {
                        receivers_of[r].push(receivers.len());
                    }
                    receivers.push(Receiver { rails, ack: a });
                }
            }
        }

        let reset = graph.reset_values();
        Ok(Simulator {
            graph,
            config,
            reset,
            net_rank,
            channel_rails,
            rail_of,
            input_acks,
            is_input_ack,
            receivers,
            receivers_of,
        })
    }

    pub fn netlist(&self) -> &Netlist {
        self.graph.netlist()
    }

    pub fn graph(&self) -> &CircuitGraph {
        &self.graph
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Net values at cycle start, in netlist net order.
    pub fn reset_state(&self) -> &[bool] {
        &self.reset
    }

    /// One four-phase cycle: superposed waveform plus full event log.
    pub fn run_cycle(
        &self,
        inputs: &Assignment,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<CycleResult> {
        if !(noise_sigma >= 0.0) {
            return Err(Error::Domain(format!(
                "noise sigma must be >= 0, got {noise_sigma}"
            )));
        }
        let (state, phases, returned) = self.simulate(inputs)?;
        let pulses: Vec<CurrentPulse> = state.pulses.iter().map(|p| p.pulse).collect();
        let waveform = current::block_current(
            &pulses,
            self.config.params.sample_period_ps,
            noise_sigma,
            seed,
        )?;
        Ok(CycleResult {
            waveform,
            events: state.events,
            pulses: state.pulses,
            phases,
            returned_to_reset: returned,
        })
    }

    fn simulate(&self, inputs: &Assignment) -> Result<(RunState, PhaseTimes, bool)> {
        let netlist = self.graph.netlist();
        inputs.check_inputs(netlist)?;
        let n_gates = netlist.gates.len();
        let mut st = RunState {
            values: self.reset.clone(),
            pending: vec![None; n_gates],
            generation: vec![0; n_gates],
            queue: BinaryHeap::new(),
            seq: 0,
            half: Half::Evaluation,
            launched: false,
            ack_ps: None,
            rtz_ps: 0.0,
            events: Vec::new(),
            pulses: Vec::new(),
        };
        for ch in netlist.input_channels() {
            let code = inputs.get(&ch.name).expect("checked");
            for (rail, &bit) in ch.rails.iter().zip(&code.0) {
                if bit {
                    let n = self.graph.index.net(rail);
                    st.push(
                        0.0,
                        self.net_rank[n],
                        Action::Drive {
                            net: n,
                            value: true,
                        },
                    );
                }
            }
        }

        let mut processed = 0usize;
        let mut now = 0.0;
        loop {
            let Some(item) = st.queue.pop() else {
                match st.half {
                    Half::Evaluation => {
                        if !self.input_acks.is_empty() {
                            return Err(Error::NonQuiescent(format!(
                                "evaluation quiesced at {now} ps without asserting the input acknowledge"
                            )));
                        }
                        st.launched = true;
                        st.push(
                            now + self.config.env_delay_ps,
                            usize::MAX,
                            Action::LaunchSpacer,
                        );
                        continue;
                    }
                    Half::ReturnToZero => {
                        if !self.input_acks.iter().all(|&a| st.values[a]) {
                            return Err(Error::NonQuiescent(format!(
                                "return-to-zero quiesced at {now} ps without releasing the input acknowledge"
                            )));
                        }
                        break;
                    }
                }
            };
            processed += 1;
            if item.time > self.config.horizon_ps || processed > self.config.max_events {
                return Err(Error::NonQuiescent(format!(
                    "no quiescence after {processed} events / {} ps",
                    item.time
                )));
            }
            now = item.time;
            match item.action {
                Action::GateOutput { gate, generation } => {
                    let Some(p) = st.pending[gate] else { continue };
                    if p.generation != generation {
                        continue;
                    }
                    st.pending[gate] = None;
                    let out = self.graph.index.gate_output[gate];
                    st.values[out] = p.target;
                    let polarity = if p.target {
                        Polarity::Charge
                    } else {
                        Polarity::Discharge
                    };
                    let pulse = current::gate_pulse(
                        self.graph.index.total_cap[out],
                        p.trigger,
                        polarity,
                        &self.config.params,
                    )?;
                    st.pulses.push(SimPulse {
                        pulse,
                        half: p.half,
                        gate,
                    });
                    self.log(&mut st, now, out, Some(gate));
                    self.propagate(&mut st, out, now)?;
                }
                Action::Drive { net, value } => {
                    if st.values[net] == value {
                        continue;
                    }
                    st.values[net] = value;
                    self.log(&mut st, now, net, None);
                    self.propagate(&mut st, net, now)?;
                }
                Action::LaunchSpacer => {
                    st.half = Half::ReturnToZero;
                    st.rtz_ps = now;
                    for ch in netlist.input_channels() {
                        for rail in &ch.rails {
                            let n = self.graph.index.net(rail);
                            if st.values[n] {
                                st.push(
                                    now,
                                    self.net_rank[n],
                                    Action::Drive {
                                        net: n,
                                        value: false,
                                    },
                                );
                            }
                        }
                    }
                }
            }
        }
        let returned = st.values == self.reset && st.pending.iter().all(Option::is_none);
        let phases = PhaseTimes {
            ack_ps: st.ack_ps,
            rtz_ps: st.rtz_ps,
            done_ps: now,
        };
        Ok((st, phases, returned))
    }

    fn log(&self, st: &mut RunState, time: f64, net: usize, gate: Option<usize>) {
        let netlist = self.graph.netlist();
        st.events.push(TransitionEvent {
            time_ps: time,
            net: self.graph.index.net_ids[net].clone(),
            direction: if st.values[net] {
                Direction::Rise
            } else {
                Direction::Fall
            },
            gate: gate.map(|g| netlist.gates[g].id.clone()),
            level: gate.map_or(0, |g| self.graph.level_of(g)),
            half: st.half,
        });
    }

    fn propagate(&self, st: &mut RunState, net: usize, now: f64) -> Result<()> {
        let netlist = self.graph.netlist();
        let idx = &self.graph.index;
        for &ci in &self.rail_of[net] {
            let (name, rails) = &self.channel_rails[ci];
            if rails.iter().filter(|&&r| st.values[r]).count() > 1 {
                return Err(Error::IllegalCodeword {
                    channel: name.clone(),
                    time_ps: now,
                });
            }
        }

        let reset_active = idx.reset.is_some_and(|r| st.values[r]);
        let mut buf = Vec::new();
        for &g in &idx.sinks[net] {
            let gate = &netlist.gates[g];
            let out = idx.gate_output[g];
            buf.clear();
            buf.extend(idx.gate_inputs[g].iter().map(|&n| st.values[n]));
            let target = if gate.has_reset && reset_active {
                false
            } else {
                eval_gate(gate.kind, &buf, st.values[out])
            };
            if target != st.values[out] {
                if st.pending[g].is_none() {
                    st.generation[g] += 1;
                    let generation = st.generation[g];
                    st.pending[g] = Some(Pending {
                        generation,
                        target,
                        trigger: now,
                        half: st.half,
                    });
                    let at = now + self.config.params.switching_delay(idx.total_cap[out]);
                    st.push(
                        at,
                        self.net_rank[out],
                        Action::GateOutput {
                            gate: g,
                            generation,
                        },
                    );
                }
            } else if st.pending[g].is_some() {
                // inertial cancel
                st.pending[g] = None;
                st.generation[g] += 1;
            }
        }

        if self.is_input_ack[net] {
            let all_low = self.input_acks.iter().all(|&a| !st.values[a]);
            if st.half == Half::Evaluation && !st.launched && all_low {
                st.launched = true;
                st.ack_ps = Some(now);
                st.push(
                    now + self.config.env_delay_ps,
                    usize::MAX,
                    Action::LaunchSpacer,
                );
            }
        }

        for &ri in &self.receivers_of[net] {
            let r = &self.receivers[ri];
            let high = r.rails.iter().filter(|&&x| st.values[x]).count();
            let at = now + self.config.env_delay_ps;
            if high == 1 && st.values[net] {
                st.push(
                    at,
                    self.net_rank[r.ack],
                    Action::Drive {
                        net: r.ack,
                        value: false,
                    },
                );
            } else if high == 0 {
                st.push(
                    at,
                    self.net_rank[r.ack],
                    Action::Drive {
                        net: r.ack,
                        value: true,
                    },
                );
            }
        }
        Ok(())
    }

    /// One trace per plaintext. Row `i` is the evaluation half aligned on the
    /// phase-1 input edge followed by the return-to-zero half aligned on the
    /// phase-3 input edge. Noise for run `i` is drawn from stream `i` of
    /// `seed`, so rows do not depend on scheduling.
    pub fn collect_traces(
        &self,
        plaintexts: &[u8],
        key: u8,
        target: Target,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<TraceMatrix> {
        if plaintexts.is_empty() {
            return Err(Error::Input("plaintext list is empty".into()));
        }
        if !(noise_sigma >= 0.0) {
            return Err(Error::Domain(format!(
                "noise sigma must be >= 0, got {noise_sigma}"
            )));
        }
        let netlist = self.graph.netlist();
        let runs: Vec<(Vec<CurrentPulse>, Vec<CurrentPulse>, f64)> = plaintexts
            .par_iter()
            .map(|&pt| {
                let stim = target.stimulus(netlist, pt, key)?;
                let (st, phases, _) = self.simulate(&stim)?;
                let (eval, rtz): (Vec<SimPulse>, Vec<SimPulse>) = st
                    .pulses
                    .into_iter()
                    .partition(|p| p.half == Half::Evaluation);
                Ok((
                    eval.into_iter().map(|p| p.pulse).collect(),
                    rtz.into_iter().map(|p| p.pulse).collect(),
                    phases.rtz_ps,
                ))
            })
            .collect::<Result<_>>()?;
        let dt = self.config.params.sample_period_ps;
        let eval_samples = runs
            .iter()
            .map(|(e, _, _)| current::samples_to_cover(e, 0.0, dt))
            .max()
            .unwrap_or(1);
        let rtz_samples = runs
            .iter()
            .map(|(_, r, t3)| current::samples_to_cover(r, *t3, dt))
            .max()
            .unwrap_or(1);
        let cols = eval_samples + rtz_samples;
        let rows: Vec<Vec<f64>> = runs
            .par_iter()
            .enumerate()
            .map(|(i, (eval, rtz, t3))| {
                let mut row = vec![0.0; cols];
                let (head, tail) = row.split_at_mut(eval_samples);
                current::render_into(head, eval, 0.0, dt);
                current::render_into(tail, rtz, *t3, dt);
                current::add_noise(&mut row, noise_sigma, seed, i as u64);
                row
            })
            .collect();
        Ok(TraceMatrix {
            data: rows.concat(),
            rows: plaintexts.len(),
            cols,
            eval_samples,
            sample_period_ps: dt,
            plaintexts: plaintexts.to_vec(),
        })
    }
}

/// Convenience wrapper: compile `netlist` and run one cycle.
pub fn run_cycle(
    netlist: &Netlist,
    inputs: &Assignment,
    config: SimConfig,
    noise_sigma: f64,
    seed: u64,
) -> Result<CycleResult> {
    Simulator::new(netlist, config)?.run_cycle(inputs, noise_sigma, seed)
}

/// Convenience wrapper around [`Simulator::collect_traces`].
pub fn collect_traces(
    netlist: &Netlist,
    plaintexts: &[u8],
    key: u8,
    target: Target,
    config: SimConfig,
    noise_sigma: f64,
    seed: u64,
) -> Result<TraceMatrix> {
    Simulator::new(netlist, config)?.collect_traces(plaintexts, key, target, noise_sigma, seed)
}

/// How a plaintext byte and the embedded key map onto input channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Single XOR: `a` = plaintext bit 0, `b` = plaintext bit 1 ^ key bit 0.
    DimsXor,
    /// Byte bank: `p{i}` = plaintext bit i, `k{i}` = key bit i.
    AddRoundKey,
}

impl Target {
    pub fn stimulus(&self, netlist: &Netlist, plaintext: u8, key: u8) -> Result<Assignment> {
        let bit = |v: u8, i: usize| ((v >> i) & 1) as usize;
        let values: Vec<(String, usize)> = match self {
            Target::DimsXor => vec![
                ("a".into(), bit(plaintext, 0)),
                ("b".into(), bit(plaintext, 1) ^ bit(key, 0)),
            ],
            Target::AddRoundKey => (0..crate::designs::ADD_ROUND_KEY_BITS)
                .flat_map(|i| {
                    [
                        (format!("p{i}"), bit(plaintext, i)),
                        (format!("k{i}"), bit(key, i)),
                    ]
                })
                .collect(),
        };
        let mut a = Assignment::default();
        for (name, v) in values {
            let ch = netlist
                .channel(&name)
                .ok_or_else(|| Error::Input(format!("target {self:?} needs channel `{name}`")))?;
            a.insert(&name, Codeword::data(ch.arity(), v));
        }
        Ok(a)
    }

    /// Distinct plaintexts that cover the target's input space.
    pub fn exhaustive_plaintexts(&self) -> Vec<u8> {
        match self {
            Target::DimsXor => (0..4).collect(),
            Target::AddRoundKey => (0..=255).collect(),
        }
    }
}

/// N runs by T samples of block current.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMatrix {
    /// Row-major samples in uA.
    pub data: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    /// Columns `0..eval_samples` are the evaluation half.
    pub eval_samples: usize,
    pub sample_period_ps: f64,
    pub plaintexts: Vec<u8>,
}

impl TraceMatrix {
    pub fn new(
        rows: Vec<Vec<f64>>,
        plaintexts: Vec<u8>,
        sample_period_ps: f64,
        eval_samples: usize,
    ) -> Result<Self> {
        if rows.len() != plaintexts.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                got: plaintexts.len(),
            });
        }
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LengthMismatch {
                expected: cols,
                got: bad.len(),
            });
        }
        Ok(TraceMatrix {
            rows: rows.len(),
            data: rows.concat(),
            cols,
            eval_samples: eval_samples.min(cols),
            sample_period_ps,
            plaintexts,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }
}
