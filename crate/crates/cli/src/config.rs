// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration files and input resolution.
//!
//! Precedence, highest first: command-line flags (a `--params` file replaces
//! the config's `params`), the `--config` file, builtin defaults. Relative
//! paths inside a config file resolve against the file's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use qdi_dpa::dpa::Algorithm;
use qdi_dpa::netlist::parse_netlist;
use qdi_dpa::{
    builtin_add_round_key, builtin_dims_xor, ElectricalParams, Netlist, PlacementParams, Target,
};

/// Raised for bad flags or missing mandatory values; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const BUILTIN_XOR: &str = "builtin:dims-xor";
pub const BUILTIN_ARK: &str = "builtin:add-round-key";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub algorithm: Option<Algorithm>,
    pub bit: Option<u8>,
    pub plaintexts: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    pub flat: Option<PlacementParams>,
    pub hierarchical: Option<PlacementParams>,
    pub n_seeds: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub netlist: Option<String>,
    pub params: Option<ElectricalParams>,
    pub env_delay_ps: Option<f64>,
    pub placement: Option<PlacementSpec>,
    pub attack: Option<AttackSpec>,
    pub target: Option<Target>,
    pub key: Option<String>,
    #[serde(rename = "noise_sigma_uA")]
    pub noise_sigma_ua: Option<f64>,
    #[serde(default)]
    pub perturb: Vec<String>,
    #[serde(default)]
    pub imbalance: Vec<String>,
    pub slice: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ExperimentConfig::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text)
                .map_err(qdi_dpa::Error::from)
                .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Resolves a path written inside the config file.
    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = PathBuf::from(p);
        if p.is_relative() {
            self.base_dir.join(p)
        } else {
            p
        }
    }

    /// Netlist source from the flag, else the config, else `default`.
    pub fn netlist_source(&self, flag: Option<&str>, default: Option<&str>) -> Result<String> {
        if let Some(f) = flag {
            return Ok(f.to_string());
        }
        if let Some(n) = &self.netlist {
            return Ok(if n.starts_with("builtin:") {
                n.clone()
            } else {
                self.resolve(n).display().to_string()
            });
        }
        default.map(str::to_string).ok_or_else(|| {
            usage("no netlist given (pass a path or builtin:dims-xor / builtin:add-round-key)")
        })
    }

    /// Electrical parameters: config, overridden by a `--params` file.
    pub fn electrical(&self, params_file: Option<&Path>) -> Result<ElectricalParams> {
        let params = match params_file {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading params {}", p.display()))?;
                serde_json::from_str(&text)
                    .map_err(qdi_dpa::Error::from)
                    .with_context(|| format!("parsing params {}", p.display()))?
            }
            None => self.params.unwrap_or_default(),
        };
        params.check()?;
        Ok(params)
    }
}

/// Loads a netlist from a path or a `builtin:` name.
pub fn load_netlist(source: &str) -> Result<Netlist> {
    match source {
        BUILTIN_XOR => Ok(builtin_dims_xor()),
        BUILTIN_ARK => Ok(builtin_add_round_key()),
        s if s.starts_with("builtin:") => bail!(usage(format!("unknown builtin `{s}`"))),
        path => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading netlist {path}"))?;
            parse_netlist(&text).with_context(|| format!("netlist {path}"))
        }
    }
}

pub fn parse_key(s: &str) -> Result<u8> {
    let t = s.trim().trim_start_matches("0x").trim_start_matches("0X");
    u8::from_str_radix(t, 16).map_err(|_| usage(format!("`{s}` is not a hex byte")))
}

/// `exhaustive`, `random:N` or `file:PATH` (whitespace-separated hex bytes).
pub fn plaintexts(
    source: &str,
    target: Target,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<Vec<u8>> {
    if source == "exhaustive" {
        return Ok(target.exhaustive_plaintexts());
    }
    if let Some(n) = source.strip_prefix("random:") {
        let n: usize = n
            .parse()
            .map_err(|_| usage(format!("bad plaintext count in `{source}`")))?;
        if n == 0 {
            bail!(usage("random plaintext count must be >= 1"));
        }
        let space = target.exhaustive_plaintexts().len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        return Ok((0..n).map(|_| rng.random_range(0..space) as u8).collect());
    }
    if let Some(path) = source.strip_prefix("file:") {
        let path = cfg.resolve(path);
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading plaintexts {}", path.display()))?;
        let pts = text
            .split_whitespace()
            .map(parse_key)
            .collect::<Result<Vec<u8>>>()
            .with_context(|| format!("plaintext file {}", path.display()))?;
        if pts.is_empty() {
            bail!(qdi_dpa::Error::Input(format!(
                "plaintext file {} is empty",
                path.display()
            )));
        }
        return Ok(pts);
    }
    bail!(usage(format!(
        "plaintext source `{source}` is not exhaustive, random:N or file:PATH"
    )))
}
