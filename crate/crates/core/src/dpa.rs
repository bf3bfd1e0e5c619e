// SPDX-License-Identifier: Apache-2.0

//! Difference-of-means DPA: selection functions, partitioning, set
//! averages, bias signals and key ranking.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sim::TraceMatrix;
use crate::{Error, Result};

/// Peaks at or below this magnitude (uA) carry no information.
pub const INCONCLUSIVE_PEAK_UA: f64 = 1e-9;

/// First DES S-box, rows indexed by input bits 1 and 6, columns by bits 2..5.
const DES_S1: [[u8; 16]; 4] = [
    [14, 4, 13, 1, 2, 15, 11, 8, 3, 10, 6, 12, 5, 9, 0, 7],
    [0, 15, 7, 4, 14, 2, 13, 1, 10, 6, 12, 11, 9, 5, 3, 8],
    [4, 1, 14, 8, 13, 6, 2, 11, 15, 12, 9, 7, 3, 10, 5, 0],
    [15, 12, 8, 2, 4, 9, 1, 7, 5, 11, 3, 14, 10, 0, 6, 13],
];

/// DES S1 lookup on a 6-bit input.
pub fn des_sbox1(x: u8) -> Result<u8> {
    if x >= 64 {
        return Err(Error::Domain(format!(
            "S-box input {x} is not a 6-bit value"
        )));
    }
    let row = ((x >> 4) & 0b10) | (x & 1);
    let col = (x >> 1) & 0xF;
    Ok(DES_S1[row as usize][col as usize])
}

/// Bit `bit` of `pti ^ key_guess`, bit 0 = least significant.
pub fn d_aes(pti: u8, key_guess: u8, bit: u8) -> Result<bool> {
    if bit > 7 {
        return Err(Error::Domain(format!("AES bit index {bit} out of 0..7")));
    }
    Ok((pti ^ key_guess) >> bit & 1 == 1)
}

/// Bit `bit` of `S1(p6 ^ k0)`, bit 0 = most significant of the 4 output bits.
pub fn d_des(p6: u8, k0: u8, bit: u8) -> Result<bool> {
    if bit > 3 {
        return Err(Error::Domain(format!("DES output bit {bit} out of 0..3")));
    }
    if k0 >= 64 {
        return Err(Error::Domain(format!(
            "DES subkey {k0} is not a 6-bit value"
        )));
    }
    let s = des_sbox1(p6 ^ k0)?;
    Ok(s >> (3 - bit) & 1 == 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "DES-SBOX1")]
    DesSbox1,
    #[serde(rename = "AES-XOR")]
    AesXor,
}

impl Algorithm {
    pub fn guess_bits(self) -> u32 {
        match self {
            Algorithm::DesSbox1 => 6,
            Algorithm::AesXor => 8,
        }
    }

    pub fn max_bit(self) -> u8 {
        match self {
            Algorithm::DesSbox1 => 3,
            Algorithm::AesXor => 7,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::DesSbox1 => "DES-SBOX1",
            Algorithm::AesXor => "AES-XOR",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DES-SBOX1" | "DES" => Ok(Algorithm::DesSbox1),
            "AES-XOR" | "AES" => Ok(Algorithm::AesXor),
            _ => Err(Error::Input(format!("unknown selection algorithm `{s}`"))),
        }
    }
}

/// A single-bit selection function `D(plaintext, guess)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionFunction {
    pub algorithm: Algorithm,
    pub bit: u8,
}

impl SelectionFunction {
    pub fn new(algorithm: Algorithm, bit: u8) -> Result<Self> {
        let s = SelectionFunction { algorithm, bit };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.bit > self.algorithm.max_bit() {
            return Err(Error::Domain(format!(
                "{} bit index {} out of 0..{}",
                self.algorithm,
                self.bit,
                self.algorithm.max_bit()
            )));
        }
        Ok(())
    }

    pub fn guess_count(&self) -> usize {
        1 << self.algorithm.guess_bits()
    }

    pub fn eval(&self, plaintext: u8, guess: u8) -> Result<bool> {
        match self.algorithm {
            Algorithm::AesXor => d_aes(plaintext, guess, self.bit),
            Algorithm::DesSbox1 => d_des(plaintext, guess, self.bit),
        }
    }
}

/// Two borrowed row sets: `(d = 0, d = 1)`.
pub type Partition<'a> = (Vec<&'a [f64]>, Vec<&'a [f64]>);

/// Rows with `d = 0` and rows with `d = 1`, borrowed from `traces`.
pub fn partition<'a>(traces: &'a TraceMatrix, d_bits: &[bool]) -> Result<Partition<'a>> {
    if d_bits.len() != traces.rows {
        return Err(Error::LengthMismatch {
            expected: traces.rows,
            got: d_bits.len(),
        });
    }
    let mut s0 = Vec::new();
    let mut s1 = Vec::new();
    for (row, &d) in traces.iter_rows().zip(d_bits) {
        if d {
            s1.push(row);
        } else {
            s0.push(row);
        }
    }
    Ok((s0, s1))
}

/// Samplewise mean of a non-empty set of equal-length traces.
pub fn average(set: &[&[f64]]) -> Result<Vec<f64>> {
    let first = set.first().ok_or(Error::EmptySet)?;
    let mut acc = vec![0.0; first.len()];
    for row in set {
        if row.len() != acc.len() {
            return Err(Error::LengthMismatch {
                expected: acc.len(),
                got: row.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(row.iter()) {
            *a += x;
        }
    }
    let n = set.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// `T = A0 - A1`.
pub fn bias(a0: &[f64], a1: &[f64]) -> Result<Vec<f64>> {
    if a0.len() != a1.len() {
        return Err(Error::LengthMismatch {
            expected: a0.len(),
            got: a1.len(),
        });
    }
    Ok(a0.iter().zip(a1).map(|(x, y)| x - y).collect())
}

/// Outcome for one key guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessResult {
    pub guess: u8,
    /// Empty when one partition side is empty.
    pub bias: Vec<f64>,
    /// `max_j |T[j]|`, `None` when not comparable.
    pub peak: Option<f64>,
    /// Sample index of the peak.
    pub peak_index: Option<usize>,
    pub n0: usize,
    pub n1: usize,
    /// Competition rank: 1 + number of guesses with a strictly larger peak.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpaResult {
    pub selection: SelectionFunction,
    pub n_traces: usize,
    /// Indexed by guess value.
    pub guesses: Vec<GuessResult>,
    /// Guesses by descending peak, ties by ascending guess, non-comparable last.
    pub ranking: Vec<u8>,
    /// At least one guess has a peak above [`INCONCLUSIVE_PEAK_UA`].
    pub conclusive: bool,
}

impl DpaResult {
    pub fn guess(&self, g: u8) -> Option<&GuessResult> {
        self.guesses.get(g as usize)
    }

    pub fn rank_of(&self, g: u8) -> Option<usize> {
        self.guess(g).map(|r| r.rank)
    }

    /// Number of guesses sharing the top rank.
    pub fn top_tie_count(&self) -> usize {
        self.guesses.iter().filter(|g| g.rank == 1).count()
    }
}

fn peak_of(t: &[f64]) -> (f64, usize) {
    t.iter().enumerate().fold(
        (0.0, 0),
        |(m, mi), (i, x)| if x.abs() > m { (x.abs(), i) } else { (m, mi) },
    )
}

fn cmp_peak(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Runs the attack over the full guess space of `selection`.
pub fn attack(traces: &TraceMatrix, selection: SelectionFunction) -> Result<DpaResult> {
    selection.check()?;
    let n = selection.guess_count();
    let mut guesses: Vec<GuessResult> = (0..n)
        .into_par_iter()
        .map(|g| {
            let guess = g as u8;
            let d: Vec<bool> = traces
                .plaintexts
                .iter()
                .map(|&p| selection.eval(p, guess))
                .collect::<Result<_>>()?;
            let (s0, s1) = partition(traces, &d)?;
            let (n0, n1) = (s0.len(), s1.len());
            if n0 == 0 || n1 == 0 {
                return Ok(GuessResult {
                    guess,
                    bias: Vec::new(),
                    peak: None,
                    peak_index: None,
                    n0,
                    n1,
                    rank: 0,
                });
            }
            let t = bias(&average(&s0)?, &average(&s1)?)?;
            let (peak, idx) = peak_of(&t);
            Ok(GuessResult {
                guess,
                bias: t,
                peak: Some(peak),
                peak_index: Some(idx),
                n0,
                n1,
                rank: 0,
            })
        })
        .collect::<Result<_>>()?;

    let peaks: Vec<Option<f64>> = guesses.iter().map(|g| g.peak).collect();
    for g in guesses.iter_mut() {
        g.rank = 1 + peaks
            .iter()
            .filter(|&&p| cmp_peak(p, g.peak) == Ordering::Less)
            .count();
    }
    let mut ranking: Vec<u8> = guesses.iter().map(|g| g.guess).collect();
    ranking.sort_by(|&a, &b| cmp_peak(peaks[a as usize], peaks[b as usize]).then(a.cmp(&b)));
    let conclusive = peaks.iter().flatten().any(|&p| p > INCONCLUSIVE_PEAK_UA);
    Ok(DpaResult {
        selection,
        n_traces: traces.rows,
        guesses,
        ranking,
        conclusive,
    })
}

/// A contiguous run of samples with `|x| > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lobe {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub peak_index: usize,
    /// Signed value at `peak_index`.
    pub peak: f64,
}

/// Lobes of `signal` above an absolute threshold.
pub fn lobes(signal: &[f64], threshold: f64) -> Vec<Lobe> {
    let mut out = Vec::new();
    let mut current: Option<Lobe> = None;
    for (i, &x) in signal.iter().enumerate() {
        if x.abs() > threshold {
            let l = current.get_or_insert(Lobe {
                start: i,
                end: i + 1,
                peak_index: i,
                peak: x,
            });
            l.end = i + 1;
            if x.abs() > l.peak.abs() {
                l.peak_index = i;
                l.peak = x;
            }
        } else if let Some(l) = current.take() {
            out.push(l);
        }
    }
    out.extend(current);
    out
}

/// Sum of `|x|` times the sample period.
pub fn integrated_abs(signal: &[f64], sample_period_ps: f64) -> f64 {
    signal.iter().map(|x| x.abs()).sum::<f64>() * sample_period_ps
}
