// SPDX-License-Identifier: Apache-2.0

//! Rail dissymmetry per channel and a statistical model of flat vs
//! hierarchical place and route.
//!
//! Placement only redraws the routing part of each net's load capacitance:
//! `c_load = fanout * pin_fF + base_fF * (1 + u)` with
//! `u ~ U(-dispersion, +dispersion)`.

use std::fmt::{self, Write as _};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::netlist::{Indexed, Netlist};
use crate::{Error, Result};

/// `(max - min) / min` over the rail capacitances; `|C0 - C1| / min` for
/// dual-rail.
pub fn channel_dissymmetry(rail_caps: &[f64]) -> Result<f64> {
    if rail_caps.len() < 2 {
        return Err(Error::Domain(format!(
            "dissymmetry needs at least 2 rails, got {}",
            rail_caps.len()
        )));
    }
    if let Some(bad) = rail_caps.iter().find(|&&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::Domain(format!(
            "rail capacitance must be > 0, got {bad}"
        )));
    }
    let min = rail_caps.iter().copied().fold(f64::INFINITY, f64::min);
    let max = rail_caps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((max - min) / min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEntry {
    pub channel: String,
    #[serde(rename = "rail_caps_fF")]
    pub rail_caps_ff: Vec<f64>,
    #[serde(rename = "d_A")]
    pub d_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissymmetryReport {
    /// Sorted by descending d_A, ties by channel name.
    pub entries: Vec<ChannelEntry>,
    #[serde(rename = "max_d_A")]
    pub max_d_a: f64,
    #[serde(rename = "mean_d_A")]
    pub mean_d_a: f64,
}

impl DissymmetryReport {
    /// Fixed-width table: channel, rail capacitances, d_A.
    pub fn to_table(&self) -> String {
        let width = self
            .entries
            .iter()
            .map(|e| e.channel.len())
            .max()
            .unwrap_or(0)
            .max("channel".len());
        let rails = self
            .entries
            .iter()
            .map(|e| e.rail_caps_ff.len())
            .max()
            .unwrap_or(2);
        let mut out = format!("{:<width$}", "channel");
        for r in 0..rails {
            let _ = write!(out, " {:>10}", format!("C{r} (fF)"));
        }
        out.push_str("      d_A\n");
        for e in &self.entries {
            let _ = write!(out, "{:<width$}", e.channel);
            for r in 0..rails {
                match e.rail_caps_ff.get(r) {
                    Some(c) => {
                        let _ = write!(out, " {c:>10.3}");
                    }
                    None => out.push_str("           "),
                }
            }
            let _ = writeln!(out, " {:>8.2}", e.d_a);
        }
        let _ = writeln!(
            out,
            "max d_A {:.4}  mean d_A {:.4}",
            self.max_d_a, self.mean_d_a
        );
        out
    }
}

impl fmt::Display for DissymmetryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

/// One entry per channel of `netlist`.
pub fn report(netlist: &Netlist) -> Result<DissymmetryReport> {
    let mut entries = Vec::with_capacity(netlist.channels.len());
    for ch in &netlist.channels {
        let caps = ch
            .rails
            .iter()
            .map(|r| {
                netlist
                    .net(r)
                    .map(|n| n.total_capacitance())
                    .ok_or_else(|| {
                        Error::Input(format!(
                            "channel `{}` rail `{r}` is not a declared net",
                            ch.name
                        ))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let d_a = channel_dissymmetry(&caps)
            .map_err(|e| Error::Domain(format!("channel `{}`: {e}", ch.name)))?;
        entries.push(ChannelEntry {
            channel: ch.name.clone(),
            rail_caps_ff: caps,
            d_a,
        });
    }
    entries.sort_by(|a, b| {
        b.d_a
            .total_cmp(&a.d_a)
            .then_with(|| a.channel.cmp(&b.channel))
    });
    let max_d_a = entries.first().map_or(0.0, |e| e.d_a);
    let mean_d_a = if entries.is_empty() {
        0.0
    } else {
        entries.iter().map(|e| e.d_a).sum::<f64>() / entries.len() as f64
    };
    Ok(DissymmetryReport {
        entries,
        max_d_a,
        mean_d_a,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementMode {
    Flat,
    Hierarchical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementParams {
    pub mode: PlacementMode,
    /// Routing capacitance baseline per net.
    #[serde(rename = "base_fF")]
    pub base_ff: f64,
    /// Gate-pin capacitance per sink.
    #[serde(rename = "pin_fF", default = "default_pin_ff")]
    pub pin_ff: f64,
    pub dispersion: f64,
    pub area_overhead: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_pin_ff() -> f64 {
    1.0
}

impl PlacementParams {
    pub fn flat(seed: u64) -> Self {
        PlacementParams {
            mode: PlacementMode::Flat,
            base_ff: 8.0,
            pin_ff: default_pin_ff(),
            dispersion: 0.8,
            area_overhead: 1.0,
            seed,
        }
    }

    pub fn hierarchical(seed: u64) -> Self {
        PlacementParams {
            mode: PlacementMode::Hierarchical,
            dispersion: 0.05,
            area_overhead: 1.20,
            ..PlacementParams::flat(seed)
        }
    }

    pub fn defaults(mode: PlacementMode, seed: u64) -> Self {
        match mode {
            PlacementMode::Flat => PlacementParams::flat(seed),
            PlacementMode::Hierarchical => PlacementParams::hierarchical(seed),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.base_ff > 0.0) {
            return Err(Error::Domain(format!(
                "base_fF must be > 0, got {}",
                self.base_ff
            )));
        }
        if !(self.pin_ff >= 0.0) {
            return Err(Error::Domain(format!(
                "pin_fF must be >= 0, got {}",
                self.pin_ff
            )));
        }
        if !(0.0..1.0).contains(&self.dispersion) {
            return Err(Error::Domain(format!(
                "dispersion must lie in [0, 1), got {}",
                self.dispersion
            )));
        }
        if !(self.area_overhead > 0.0) {
            return Err(Error::Domain(format!(
                "area_overhead must be > 0, got {}",
                self.area_overhead
            )));
        }
        Ok(())
    }

    /// Area proxy: gate count times the declared overhead.
    pub fn area(&self, netlist: &Netlist) -> f64 {
        netlist.gates.len() as f64 * self.area_overhead
    }
}

/// Re-annotates every net's `c_load` in netlist order from a ChaCha stream
/// seeded by `params.seed`.
pub fn assign_capacitances(netlist: &Netlist, params: &PlacementParams) -> Result<Netlist> {
    params.check()?;
    let violations = crate::netlist::validate(netlist);
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    let idx = Indexed::new(netlist);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out = netlist.clone();
    for (i, net) in out.nets.iter_mut().enumerate() {
        let u = if params.dispersion > 0.0 {
            rng.random_range(-params.dispersion..=params.dispersion)
        } else {
            0.0
        };
        let pins = idx.sinks[i].len() as f64 * params.pin_ff;
        net.c_load_ff = pins + params.base_ff * (1.0 + u);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub mode: PlacementMode,
    /// max d_A of each seed, in seed order.
    #[serde(rename = "max_d_A")]
    pub max_d_a: Vec<f64>,
    pub median: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub area: f64,
}

impl FlowStats {
    fn new(mode: PlacementMode, max_d_a: Vec<f64>, area: f64) -> Self {
        let mut sorted = max_d_a.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        FlowStats {
            mode,
            mean: sorted.iter().sum::<f64>() / n as f64,
            min: sorted[0],
            max: sorted[n - 1],
            median,
            max_d_a,
            area,
        }
    }

    pub fn count_below(&self, bound: f64) -> usize {
        self.max_d_a.iter().filter(|&&d| d < bound).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_seeds: usize,
    pub flat: FlowStats,
    pub hierarchical: FlowStats,
    /// Hierarchical area over flat area.
    pub area_ratio: f64,
    /// Seeds where flat max d_A strictly exceeds hierarchical.
    pub flat_worse: usize,
}

/// Runs seeds `params.seed + s` for `s in 0..n_seeds` under both flows.
pub fn compare_flows(
    netlist: &Netlist,
    flat: &PlacementParams,
    hier: &PlacementParams,
    n_seeds: usize,
) -> Result<ComparisonReport> {
    if n_seeds == 0 {
        return Err(Error::Domain("n_seeds must be >= 1".into()));
    }
    let run = |p: &PlacementParams| -> Result<Vec<f64>> {
        (0..n_seeds as u64)
            .into_par_iter()
            .map(|s| {
                let params = PlacementParams {
                    seed: p.seed.wrapping_add(s),
                    ..*p
                };
                Ok(report(&assign_capacitances(netlist, &params)?)?.max_d_a)
            })
            .collect()
    };
    let f = run(flat)?;
    let h = run(hier)?;
    let flat_worse = f.iter().zip(&h).filter(|(a, b)| a > b).count();
    let flat = FlowStats::new(flat.mode, f, flat.area(netlist));
    let hierarchical = FlowStats::new(hier.mode, h, hier.area(netlist));
    Ok(ComparisonReport {
        n_seeds,
        area_ratio: hierarchical.area / flat.area,
        flat,
        hierarchical,
        flat_worse,
    })
}

/// Raises the `c_load` of rail 1 of `channel` so that the channel reaches
/// `d_a` relative to rail 0.
pub fn set_rail_imbalance(netlist: &mut Netlist, channel: &str, d_a: f64) -> Result<()> {
    if !(d_a >= 0.0) {
        return Err(Error::Domain(format!("d_A must be >= 0, got {d_a}")));
    }
    let ch = netlist
        .channel(channel)
        .ok_or_else(|| Error::Input(format!("unknown channel `{channel}`")))?;
    if ch.rails.len() != 2 {
        return Err(Error::Domain(format!(
            "channel `{channel}` is not dual-rail"
        )));
    }
    let (r0, r1) = (ch.rails[0].clone(), ch.rails[1].clone());
    let c0 = netlist
        .net(&r0)
        .map(|n| n.total_capacitance())
        .unwrap_or(0.0);
    let net = netlist
        .net_mut(&r1)
        .ok_or_else(|| Error::Input(format!("rail `{r1}` is not a declared net")))?;
    net.c_load_ff = c0 * (1.0 + d_a) - net.c_par_ff - net.c_sc_ff;
    Ok(())
}
