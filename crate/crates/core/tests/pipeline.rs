// SPDX-License-Identifier: Apache-2.0

//! End-to-end checks that cross module boundaries.

mod common;

use qdi_dpa::current::{analytic_xor_signature, uniform_xor_caps};
use qdi_dpa::designs::{xor_caps, Perturbation};
use qdi_dpa::dissym::{report, set_rail_imbalance};
use qdi_dpa::dpa::{attack, Algorithm, SelectionFunction};
use qdi_dpa::{
    builtin_add_round_key, builtin_dims_xor, io, ElectricalParams, SimConfig, Simulator, Target,
};

use common::{global_max, simulated_xor_bias};

const KEY: u8 = 0x3C;

fn bank(d_a: f64, channel: &str) -> Simulator {
    let mut n = builtin_add_round_key();
    set_rail_imbalance(&mut n, channel, d_a).unwrap();
    Simulator::new(&n, SimConfig::default()).unwrap()
}

#[test]
fn symmetric_xor_has_null_bias_both_ways() {
    let params = ElectricalParams::default();
    let (t, _) = simulated_xor_bias(&builtin_dims_xor());
    assert!(global_max(&t) <= 1e-12 * params.reference_peak_ua());
    let a = analytic_xor_signature(&uniform_xor_caps(9.5), &params).unwrap();
    assert!(a.waveform.peak_abs() <= 1e-12 * params.reference_peak_ua());
}

#[test]
fn simulated_bias_equals_analytic_samplewise() {
    for spec in ["c_l31=2x", "c_l21=3x", "c_l12=1.5x", "c_l41=2x"] {
        let mut n = builtin_dims_xor();
        spec.parse::<Perturbation>()
            .unwrap()
            .apply(&mut n, "")
            .unwrap();
        let (t, split) = simulated_xor_bias(&n);
        let a = analytic_xor_signature(&xor_caps(&n, "").unwrap(), &ElectricalParams::default())
            .unwrap();
        assert_eq!(split, a.eval_samples, "{spec}");
        assert_eq!(t.len(), a.waveform.len(), "{spec}");
        for (x, y) in t.iter().zip(&a.waveform.samples) {
            assert!((x - y).abs() <= 1e-9, "{spec}: {x} vs {y}");
        }
    }
}

#[test]
fn shared_completion_gate_cancels() {
    let mut n = builtin_dims_xor();
    "c_l41=3x"
        .parse::<Perturbation>()
        .unwrap()
        .apply(&mut n, "")
        .unwrap();
    let (t, _) = simulated_xor_bias(&n);
    assert!(global_max(&t) <= 1e-9);
}

#[test]
fn correct_key_rank_never_worsens_with_dissymmetry() {
    let pts = Target::AddRoundKey.exhaustive_plaintexts();
    let sel = SelectionFunction::new(Algorithm::AesXor, 2).unwrap();
    let mut last_rank = usize::MAX;
    let mut last_peak = -1.0;
    for d_a in [0.0, 0.25, 0.5, 1.0] {
        let sim = bank(d_a, "c2");
        let m = sim
            .collect_traces(&pts, KEY, Target::AddRoundKey, 0.0, 0)
            .unwrap();
        let r = attack(&m, sel).unwrap();
        let rank = r.rank_of(KEY).unwrap();
        let peak = r.guess(KEY).unwrap().peak.unwrap();
        assert!(
            rank <= last_rank,
            "d_A {d_a}: rank {rank} after {last_rank}"
        );
        assert!(peak >= last_peak);
        assert_eq!(r.conclusive, d_a > 0.0);
        last_rank = rank;
        last_peak = peak;
    }
}

#[test]
fn leak_on_one_bit_stays_on_that_bit() {
    let pts = Target::AddRoundKey.exhaustive_plaintexts();
    let m = bank(1.0, "c5")
        .collect_traces(&pts, KEY, Target::AddRoundKey, 0.0, 0)
        .unwrap();
    for bit in 0..8 {
        let r = attack(&m, SelectionFunction::new(Algorithm::AesXor, bit).unwrap()).unwrap();
        assert_eq!(r.conclusive, bit == 5, "bit {bit}");
        assert!(r.guesses.iter().all(|g| g.n0 + g.n1 == 256));
    }
}

#[test]
fn trace_csv_round_trip_preserves_attack() {
    let pts = Target::AddRoundKey.exhaustive_plaintexts();
    let m = bank(0.5, "c0")
        .collect_traces(&pts, KEY, Target::AddRoundKey, 10.0, 3)
        .unwrap();
    let mut buf = Vec::new();
    io::write_traces_csv(&mut buf, &m).unwrap();
    let back =
        io::read_traces_csv(buf.as_slice(), m.sample_period_ps, Some(m.eval_samples)).unwrap();
    assert_eq!(back.plaintexts, m.plaintexts);
    let sel = SelectionFunction::new(Algorithm::AesXor, 0).unwrap();
    let a = attack(&m, sel).unwrap();
    let b = attack(&back, sel).unwrap();
    assert_eq!(a.ranking, b.ranking);
    let (pa, pb) = (
        a.guess(KEY).unwrap().peak.unwrap(),
        b.guess(KEY).unwrap().peak.unwrap(),
    );
    assert!((pa - pb).abs() <= 1e-9 * pa);
}

#[test]
fn dissymmetry_report_sees_the_injected_channel() {
    let mut n = builtin_add_round_key();
    set_rail_imbalance(&mut n, "c6", 0.75).unwrap();
    let r = report(&n).unwrap();
    assert_eq!(r.entries[0].channel, "c6");
    assert!((r.entries[0].d_a - 0.75).abs() < 1e-12);
    assert!(r.entries[1..].iter().all(|e| e.d_a == 0.0));
}

#[test]
fn des_attack_on_xor_traces_is_well_formed() {
    let n = builtin_dims_xor();
    let sim = Simulator::new(&n, SimConfig::default()).unwrap();
    let pts: Vec<u8> = (0..64).map(|p| p % 4).collect();
    let m = sim
        .collect_traces(&pts, 1, Target::DimsXor, 0.0, 0)
        .unwrap();
    let r = attack(&m, SelectionFunction::new(Algorithm::DesSbox1, 0).unwrap()).unwrap();
    let mut sorted = r.ranking.clone();
    sorted.sort();
    assert_eq!(sorted, (0..64).collect::<Vec<u8>>());
}
