// SPDX-License-Identifier: Apache-2.0

//! Dynamic current model.
//!
//! Every output transition of a gate draws a triangular current pulse whose
//! area is the switched charge `C * Vdd` and whose width is the charge time
//! `tau0 + k * C`. The gate's output crosses mid-rail, and so triggers its
//! fan-out, half way through the pulse. Block current is the superposition
//! of all pulses plus optional Gaussian noise.
//!
//! Units: capacitance fF, time ps, charge fC, current uA (1 fC/ps = 1000 uA).

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::graph::SwitchingProfile;
use crate::netlist::{Net, Netlist};
use crate::{Error, Result};

const UA_PER_FC_PER_PS: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectricalParams {
    pub vdd: f64,
    pub eta: f64,
    pub tau0_ps: f64,
    pub k_ps_per_ff: f64,
    pub sample_period_ps: f64,
}

impl Default for ElectricalParams {
    fn default() -> Self {
        ElectricalParams {
            vdd: 1.2,
            eta: 1.0,
            tau0_ps: 5.0,
            k_ps_per_ff: 2.0,
            sample_period_ps: 1.0,
        }
    }
}

impl ElectricalParams {
    pub fn check(&self) -> Result<()> {
        let ok = self.vdd > 0.0
            && self.tau0_ps >= 0.0
            && self.k_ps_per_ff > 0.0
            && self.sample_period_ps > 0.0
            && (0.0..=1.0).contains(&self.eta)
            && [
                self.vdd,
                self.eta,
                self.tau0_ps,
                self.k_ps_per_ff,
                self.sample_period_ps,
            ]
            .iter()
            .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "invalid electrical parameters {self:?}"
            )))
        }
    }

    /// Charge/discharge time of a node of capacitance `c_ff`.
    pub fn pulse_width(&self, c_ff: f64) -> f64 {
        self.tau0_ps + self.k_ps_per_ff * c_ff
    }

    /// Time from a gate's trigger to its output crossing mid-rail.
    pub fn switching_delay(&self, c_ff: f64) -> f64 {
        0.5 * self.pulse_width(c_ff)
    }

    /// Current of a single pulse at the default 9.5 fF design net.
    pub fn reference_peak_ua(&self) -> f64 {
        let c = crate::designs::DEFAULT_C_LOAD_FF
            + crate::designs::DEFAULT_C_PAR_FF
            + crate::designs::DEFAULT_C_SC_FF;
        2.0 * c * self.vdd / self.pulse_width(c) * UA_PER_FC_PER_PS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Output rising.
    Charge,
    /// Output falling.
    Discharge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentPulse {
    pub t_start: f64,
    pub width_ps: f64,
    pub charge_fc: f64,
    pub polarity: Polarity,
}

impl CurrentPulse {
    pub fn t_end(&self) -> f64 {
        self.t_start + self.width_ps
    }

    /// Peak current in uA.
    pub fn peak_ua(&self) -> f64 {
        2.0 * self.charge_fc / self.width_ps * UA_PER_FC_PER_PS
    }

    /// Charge delivered up to absolute time `t`, in fC.
    pub fn charge_until(&self, t: f64) -> f64 {
        let w = self.width_ps;
        let x = (t - self.t_start).clamp(0.0, w);
        let h = 2.0 * self.charge_fc / w;
        if x <= 0.5 * w {
            h * x * x / w
        } else {
            let r = w - x;
            self.charge_fc - h * r * r / w
        }
    }

    pub fn shifted(mut self, dt: f64) -> Self {
        self.t_start += dt;
        self
    }
}

/// C = C_l + C_par + C_sc.
pub fn total_capacitance(net: &Net) -> f64 {
    net.total_capacitance()
}

/// Triangular pulse for switching `c_total_ff` starting at `t_start`.
pub fn gate_pulse(
    c_total_ff: f64,
    t_start: f64,
    polarity: Polarity,
    params: &ElectricalParams,
) -> Result<CurrentPulse> {
    if !(c_total_ff > 0.0) || !c_total_ff.is_finite() {
        return Err(Error::Domain(format!(
            "pulse capacitance must be positive, got {c_total_ff} fF"
        )));
    }
    Ok(CurrentPulse {
        t_start,
        width_ps: params.pulse_width(c_total_ff),
        charge_fc: c_total_ff * params.vdd,
        polarity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    /// uA; sample `j` is the mean current over `[t0 + j*dt, t0 + (j+1)*dt)`.
    pub samples: Vec<f64>,
    pub sample_period_ps: f64,
    pub t0_ps: f64,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_of(&self, j: usize) -> f64 {
        self.t0_ps + j as f64 * self.sample_period_ps
    }

    /// Integrated charge in fC.
    pub fn charge_fc(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.sample_period_ps / UA_PER_FC_PER_PS
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Sort pulses so superposition order depends only on pulse values.
pub(crate) fn canonical_order(pulses: &mut [CurrentPulse]) {
    pulses.sort_by(|a, b| {
        a.t_start
            .total_cmp(&b.t_start)
            .then(a.width_ps.total_cmp(&b.width_ps))
            .then(a.charge_fc.total_cmp(&b.charge_fc))
    });
}

/// Accumulate bin-averaged pulses onto `out` whose bin 0 starts at `t0`.
pub(crate) fn render_into(out: &mut [f64], pulses: &[CurrentPulse], t0: f64, dt: f64) {
    let mut sorted = pulses.to_vec();
    canonical_order(&mut sorted);
    for p in &sorted {
        let first = ((p.t_start - t0) / dt).floor().max(0.0) as usize;
        let last = (((p.t_end() - t0) / dt).ceil().max(0.0) as usize).min(out.len());
        let mut q_prev = p.charge_until(t0 + first as f64 * dt);
        for (j, slot) in out.iter_mut().enumerate().take(last).skip(first) {
            let q = p.charge_until(t0 + (j + 1) as f64 * dt);
            *slot += (q - q_prev) / dt * UA_PER_FC_PER_PS;
            q_prev = q;
        }
    }
}

/// Number of samples needed to hold every pulse end, relative to `t0`.
pub(crate) fn samples_to_cover(pulses: &[CurrentPulse], t0: f64, dt: f64) -> usize {
    pulses
        .iter()
        .map(|p| ((p.t_end() - t0) / dt).ceil().max(0.0) as usize)
        .max()
        .unwrap_or(0)
        .max(1)
}

pub(crate) fn add_noise(samples: &mut [f64], sigma: f64, seed: u64, stream: u64) {
    if sigma <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for s in samples {
        *s += normal.sample(&mut rng);
    }
}

/// Superpose pulses on a grid starting at t = 0 and add zero-mean Gaussian
/// noise of standard deviation `noise_sigma` (uA) per sample.
pub fn block_current(
    pulses: &[CurrentPulse],
    sample_period_ps: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Waveform> {
    if !(sample_period_ps > 0.0) {
        return Err(Error::Domain("sample period must be positive".into()));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let t0 = pulses
        .iter()
        .map(|p| p.t_start)
        .fold(0.0f64, f64::min)
        .min(0.0);
    let n = samples_to_cover(pulses, t0, sample_period_ps);
    let mut samples = vec![0.0; n];
    render_into(&mut samples, pulses, t0, sample_period_ps);
    add_noise(&mut samples, noise_sigma, seed, 0);
    Ok(Waveform {
        samples,
        sample_period_ps,
        t0_ps: t0,
    })
}

/// P = eta * f_a * Vdd^2 * sum of switched capacitances, in watts.
pub fn dynamic_power_estimate(
    netlist: &Netlist,
    profile: &SwitchingProfile,
    f_a_hz: f64,
    params: &ElectricalParams,
) -> Result<f64> {
    let mut c_sum_ff = 0.0;
    for gate_id in profile.levels.values().flatten() {
        let gate = netlist
            .gate(gate_id)
            .ok_or_else(|| Error::Input(format!("profile gate `{gate_id}` not in netlist")))?;
        let net = netlist
            .net(&gate.output)
            .ok_or_else(|| Error::Input(format!("undeclared net `{}`", gate.output)))?;
        c_sum_ff += net.total_capacitance();
    }
    Ok(params.eta * f_a_hz * c_sum_ff * 1e-15 * params.vdd * params.vdd)
}

/// Position (level, index) in the four-level XOR to total capacitance (fF).
pub type XorCaps = BTreeMap<(u8, u8), f64>;

/// XOR capacitance map with every position at `c_ff`.
pub fn uniform_xor_caps(c_ff: f64) -> XorCaps {
    crate::designs::XOR_POSITIONS
        .iter()
        .map(|&p| (p, c_ff))
        .collect()
}

/// Closed-form bias for the exhaustive four-input XOR split by output value.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSignature {
    /// Evaluation half followed by return-to-zero half.
    pub waveform: Waveform,
    pub eval_samples: usize,
}

/// The switching chains of the two sets: value 0 goes through
/// I11|I12 -> I21 -> I31 -> I41 and value 1 through I13|I14 -> I22 -> I32 -> I41.
const XOR_SET_CHAINS: [[[(u8, u8); 4]; 2]; 2] = [
    [
        [(1, 1), (2, 1), (3, 1), (4, 1)],
        [(1, 2), (2, 1), (3, 1), (4, 1)],
    ],
    [
        [(1, 3), (2, 2), (3, 2), (4, 1)],
        [(1, 4), (2, 2), (3, 2), (4, 1)],
    ],
];

/// Difference of set-averaged pulse trains for the DIMS XOR, computed from
/// the capacitance map alone.
///
/// Each set averages its two input pairs; along a chain each gate starts when
/// its predecessor crosses mid-rail. The return-to-zero half repeats the same
/// chains (symmetric charge/discharge law), so the shared level-4 term
/// cancels unless upstream timing differs between the sets.
pub fn analytic_xor_signature(
    caps: &XorCaps,
    params: &ElectricalParams,
) -> Result<AnalyticSignature> {
    params.check()?;
    let cap = |pos: (u8, u8)| {
        caps.get(&pos).copied().ok_or(Error::MissingCapacitance {
            level: pos.0,
            index: pos.1,
        })
    };
    let mut trains: Vec<Vec<Vec<CurrentPulse>>> = Vec::new();
    for set in &XOR_SET_CHAINS {
        let mut set_trains = Vec::new();
        for chain in set {
            let mut t = 0.0;
            let mut pulses = Vec::new();
            for &pos in chain {
                let c = cap(pos)?;
                pulses.push(gate_pulse(c, t, Polarity::Charge, params)?);
                t += params.switching_delay(c);
            }
            set_trains.push(pulses);
        }
        trains.push(set_trains);
    }
    let dt = params.sample_period_ps;
    let n = trains
        .iter()
        .flatten()
        .map(|p| samples_to_cover(p, 0.0, dt))
        .max()
        .unwrap_or(1);
    let mut averages = Vec::new();
    for set in &trains {
        let mut acc = vec![0.0; n];
        for train in set {
            let mut row = vec![0.0; n];
            render_into(&mut row, train, 0.0, dt);
            for (a, r) in acc.iter_mut().zip(&row) {
                *a += r;
            }
        }
        let k = set.len() as f64;
        averages.push(acc.into_iter().map(|v| v / k).collect::<Vec<_>>());
    }
    let half: Vec<f64> = averages[0]
        .iter()
        .zip(&averages[1])
        .map(|(a, b)| a - b)
        .collect();
    let mut samples = half.clone();
    samples.extend_from_slice(&half);
    Ok(AnalyticSignature {
        waveform: Waveform {
            samples,
            sample_period_ps: dt,
            t0_ps: 0.0,
        },
        eval_samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::builtin_dims_xor;
    use crate::graph::{build_graph, switching_profile};
    use crate::netlist::Assignment;
    use proptest::prelude::*;

    fn defaults() -> ElectricalParams {
        ElectricalParams::default()
    }

    #[test]
    fn total_capacitance_examples() {
        assert_eq!(total_capacitance(&Net::new("n", 8.0, 1.0, 0.5)), 9.5);
        assert_eq!(total_capacitance(&Net::new("n", 8.0, 0.0, 0.0)), 8.0);
        assert_eq!(total_capacitance(&Net::new("n", 0.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn pulse_at_eight_femtofarad() {
        let p = gate_pulse(8.0, 0.0, Polarity::Charge, &defaults()).unwrap();
        assert!((p.width_ps - 21.0).abs() < 1e-12);
        assert!((p.charge_fc - 9.6).abs() < 1e-12);
        assert!((p.peak_ua() - 2.0 * 9.6 / 21.0 * 1000.0).abs() < 1e-9);
        let q = gate_pulse(16.0, 0.0, Polarity::Charge, &defaults()).unwrap();
        assert!((q.charge_fc - 19.2).abs() < 1e-12);
    }

    #[test]
    fn zero_capacitance_is_domain_error() {
        assert!(matches!(
            gate_pulse(0.0, 0.0, Polarity::Charge, &defaults()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn single_pulse_waveform() {
        let p = gate_pulse(9.5, 0.0, Polarity::Charge, &defaults()).unwrap();
        let w = block_current(&[p], 1.0, 0.0, 0).unwrap();
        assert_eq!(w.len(), 24);
        assert!((w.charge_fc() - 11.4).abs() < 1e-12);
        // symmetric triangle
        for j in 0..12 {
            assert!((w.samples[j] - w.samples[23 - j]).abs() < 1e-9);
        }
    }

    #[test]
    fn two_simultaneous_pulses_double() {
        let p = gate_pulse(9.5, 3.0, Polarity::Charge, &defaults()).unwrap();
        let one = block_current(&[p], 1.0, 0.0, 0).unwrap();
        let two = block_current(&[p, p], 1.0, 0.0, 0).unwrap();
        for (a, b) in one.samples.iter().zip(&two.samples) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn xor_evaluation_is_four_equal_area_pulses() {
        let params = defaults();
        let mut t = 0.0;
        let mut pulses = Vec::new();
        for _ in 0..4 {
            let p = gate_pulse(9.5, t, Polarity::Charge, &params).unwrap();
            t += params.switching_delay(9.5);
            pulses.push(p);
        }
        let w = block_current(&pulses, 1.0, 0.0, 0).unwrap();
        assert!((w.charge_fc() - 4.0 * 11.4).abs() < 1e-9);
        assert!(pulses.iter().all(|p| (p.charge_fc - 11.4).abs() < 1e-12));
    }

    #[test]
    fn noise_is_seeded() {
        let p = gate_pulse(9.5, 0.0, Polarity::Charge, &defaults()).unwrap();
        let a = block_current(&[p], 1.0, 5.0, 7).unwrap();
        let b = block_current(&[p], 1.0, 5.0, 7).unwrap();
        let c = block_current(&[p], 1.0, 5.0, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn power_estimate_examples() {
        let mut n = builtin_dims_xor();
        for net in &mut n.nets {
            net.c_load_ff = 8.0;
            net.c_par_ff = 0.0;
            net.c_sc_ff = 0.0;
        }
        let g = build_graph(&n).unwrap();
        let inputs = Assignment::from_values(&n, [("a", 0), ("b", 0)]).unwrap();
        let profile = switching_profile(&g, &inputs).unwrap();
        let p = dynamic_power_estimate(&n, &profile, 1e6, &defaults()).unwrap();
        assert!((p - 4.608e-8).abs() < 1e-20, "{p}");
        assert_eq!(
            dynamic_power_estimate(&n, &profile, 0.0, &defaults()).unwrap(),
            0.0
        );
        let idle = ElectricalParams {
            eta: 0.0,
            ..defaults()
        };
        assert_eq!(
            dynamic_power_estimate(&n, &profile, 1e6, &idle).unwrap(),
            0.0
        );
    }

    #[test]
    fn one_gate_power_reduces_to_single_node_formula() {
        let n = builtin_dims_xor();
        let profile = SwitchingProfile {
            n_c: 1,
            n_i: 1,
            levels: [(1, vec!["M1".to_string()])].into_iter().collect(),
        };
        let params = ElectricalParams {
            eta: 0.3,
            ..defaults()
        };
        let p = dynamic_power_estimate(&n, &profile, 2e8, &params).unwrap();
        let direct = 0.3 * 2e8 * 9.5e-15 * 1.2 * 1.2;
        assert!((p - direct).abs() <= 1e-24, "{p} vs {direct}");
    }

    #[test]
    fn symmetric_caps_cancel_exactly() {
        let s = analytic_xor_signature(&uniform_xor_caps(9.5), &defaults()).unwrap();
        assert!(s.waveform.peak_abs() <= 1e-12 * defaults().reference_peak_ua());
    }

    #[test]
    fn missing_position_is_an_error() {
        let mut caps = uniform_xor_caps(9.5);
        caps.remove(&(3, 2));
        assert!(matches!(
            analytic_xor_signature(&caps, &defaults()),
            Err(Error::MissingCapacitance { level: 3, index: 2 })
        ));
    }

    #[test]
    fn level_one_imbalance_grows_monotonically() {
        let mut last = 0.0;
        for factor in [1.0, 2.0, 4.0] {
            let mut caps = uniform_xor_caps(9.5);
            let c = 8.0 * factor + 1.5;
            caps.insert((1, 1), c);
            caps.insert((1, 2), c);
            let peak = analytic_xor_signature(&caps, &defaults())
                .unwrap()
                .waveform
                .peak_abs();
            assert!(peak >= last, "{factor}: {peak} < {last}");
            last = peak;
        }
    }

    fn pulse_strategy() -> impl Strategy<Value = CurrentPulse> {
        (0.0f64..200.0, 0.1f64..60.0).prop_map(|(t, c)| {
            gate_pulse(c, t, Polarity::Charge, &ElectricalParams::default()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn pulse_charge_is_conserved(c in 0.01f64..200.0, t in -50.0f64..500.0, dt in 0.05f64..7.0) {
            let params = ElectricalParams { sample_period_ps: dt, ..ElectricalParams::default() };
            let p = gate_pulse(c, t, Polarity::Discharge, &params).unwrap();
            let w = block_current(&[p], dt, 0.0, 0).unwrap();
            let rel = (w.charge_fc() - c * params.vdd).abs() / (c * params.vdd);
            prop_assert!(rel <= 1e-6, "rel error {}", rel);
        }

        #[test]
        fn superposition_is_linear(a in prop::collection::vec(pulse_strategy(), 0..6),
                                   b in prop::collection::vec(pulse_strategy(), 0..6)) {
            let both: Vec<_> = a.iter().chain(&b).copied().collect();
            let wab = block_current(&both, 1.0, 0.0, 0).unwrap();
            let n = wab.len();
            let mut sum = vec![0.0; n];
            render_into(&mut sum, &a, 0.0, 1.0);
            render_into(&mut sum, &b, 0.0, 1.0);
            for (x, y) in wab.samples.iter().zip(&sum) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn exchange_symmetric_caps_give_null_signature(c1 in 1.0f64..40.0, c2 in 1.0f64..40.0,
                                                      c3 in 1.0f64..40.0, c4 in 1.0f64..40.0) {
            // set-0 <-> set-1 exchange: (1,1)<->(1,3), (1,2)<->(1,4), (2,1)<->(2,2), (3,1)<->(3,2)
            let caps: XorCaps = [((1,1), c1), ((1,3), c1), ((1,2), c2), ((1,4), c2),
                ((2,1), c3), ((2,2), c3), ((3,1), c4), ((3,2), c4), ((4,1), 9.5)]
                .into_iter().collect();
            let params = ElectricalParams::default();
            let s = analytic_xor_signature(&caps, &params).unwrap();
            prop_assert!(s.waveform.peak_abs() <= 1e-12 * params.reference_peak_ua());
        }
    }
}
