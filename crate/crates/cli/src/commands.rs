// SPDX-License-Identifier: Apache-2.0

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use qdi_dpa::designs::Perturbation;
use qdi_dpa::dissym::{self, set_rail_imbalance};
use qdi_dpa::dpa::{attack as run_attack, Algorithm, SelectionFunction};
use qdi_dpa::graph::{build_graph, verify_balance};
use qdi_dpa::io::{self, TraceSidecar};
use qdi_dpa::{PlacementMode, PlacementParams, SimConfig, Simulator, Target};

use crate::config::{
    self, load_netlist, parse_key, usage, ExperimentConfig, BUILTIN_ARK, BUILTIN_XOR,
};
use crate::{AttackArgs, Common, Mode, SimulateArgs};

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = common
        .out
        .clone()
        .or_else(|| {
            cfg.out
                .as_ref()
                .map(|o| cfg.resolve(&o.display().to_string()))
        })
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn seed_of(common: &Common, cfg: &ExperimentConfig, what: &str) -> Result<u64> {
    common
        .seed
        .or(cfg.seed)
        .ok_or_else(|| usage(format!("{what} needs --seed (or `seed` in the config)")))
}

fn parse_target(s: &str) -> Result<Target> {
    match s {
        "dims-xor" | "xor" => Ok(Target::DimsXor),
        "add-round-key" | "ark" => Ok(Target::AddRoundKey),
        _ => Err(usage(format!(
            "unknown target `{s}` (dims-xor or add-round-key)"
        ))),
    }
}

pub fn check(source: &str) -> Result<u8> {
    let n = load_netlist(source)?;
    println!(
        "ok: {} gates, {} nets, {} channels",
        n.gates.len(),
        n.nets.len(),
        n.channels.len()
    );
    Ok(0)
}

pub fn analyze(netlist: Option<&str>, dot: bool, common: &Common) -> Result<u8> {
    let cfg = ExperimentConfig::load(common.config.as_deref())?;
    let source = cfg.netlist_source(netlist, None)?;
    let n = load_netlist(&source)?;
    let g = build_graph(&n)?;
    let balance = verify_balance(&g)?;
    let dir = out_dir(common, &cfg)?;
    let report = json!({
        "schema_version": qdi_dpa::SCHEMA_VERSION,
        "netlist": source,
        "n_c": g.critical_depth(),
        "n_i": balance.n_i,
        "balanced": balance.balanced,
        "balance": balance,
        "graph": g.to_json_value(),
    });
    write_text(&dir.join("graph.json"), &io::to_pretty(&report))?;
    if dot {
        write_text(&dir.join("graph.dot"), &g.to_dot())?;
    }
    println!(
        "N_c = {}, N_i = {}, balanced = {}",
        g.critical_depth(),
        balance.n_i.map_or("varies".to_string(), |v| v.to_string()),
        balance.balanced
    );
    Ok(0)
}

pub fn simulate(args: &SimulateArgs) -> Result<u8> {
    let cfg = ExperimentConfig::load(args.common.config.as_deref())?;
    let target = match args.target.as_deref() {
        Some(t) => Some(parse_target(t)?),
        None => cfg.target,
    };
    let default_netlist = match target {
        Some(Target::DimsXor) => BUILTIN_XOR,
        _ => BUILTIN_ARK,
    };
    let source = cfg.netlist_source(args.netlist.as_deref(), Some(default_netlist))?;
    let target = target.unwrap_or(if source == BUILTIN_XOR {
        Target::DimsXor
    } else {
        Target::AddRoundKey
    });
    let seed = seed_of(&args.common, &cfg, "simulate")?;
    let mut netlist = load_netlist(&source)?;

    let slice = args.slice.or(cfg.slice);
    let tag = slice.map_or(String::new(), |i| format!("_{i}"));
    let perturb = if args.perturb.is_empty() {
        &cfg.perturb
    } else {
        &args.perturb
    };
    let mut applied = Vec::new();
    for spec in perturb {
        let p: Perturbation = spec.parse()?;
        p.apply(&mut netlist, &tag)?;
        applied.push(format!(
            "{p}{}",
            slice.map_or(String::new(), |i| format!(" @slice {i}"))
        ));
    }
    let imbalance = if args.imbalance.is_empty() {
        &cfg.imbalance
    } else {
        &args.imbalance
    };
    for spec in imbalance {
        let (ch, d) = spec
            .split_once('=')
            .ok_or_else(|| usage(format!("imbalance `{spec}` is not CHANNEL=D_A")))?;
        let d: f64 = d
            .parse()
            .map_err(|_| usage(format!("imbalance `{spec}`: bad d_A")))?;
        set_rail_imbalance(&mut netlist, ch, d)?;
        applied.push(format!("{ch} d_A={d}"));
    }

    let params = cfg.electrical(args.common.params.as_deref())?;
    let sim_cfg = SimConfig {
        params,
        env_delay_ps: cfg
            .env_delay_ps
            .unwrap_or(SimConfig::default().env_delay_ps),
        ..SimConfig::default()
    };
    let key = match args.key.as_deref().or(cfg.key.as_deref()) {
        Some(k) => parse_key(k)?,
        None => 0,
    };
    let noise = args.noise.or(cfg.noise_sigma_ua).unwrap_or(0.0);
    let pt_source = args
        .plaintexts
        .clone()
        .or_else(|| cfg.attack.as_ref().and_then(|a| a.plaintexts.clone()))
        .unwrap_or_else(|| "exhaustive".into());
    let pts = config::plaintexts(&pt_source, target, seed, &cfg)?;

    let sim = Simulator::new(&netlist, sim_cfg)?;
    let traces = sim.collect_traces(&pts, key, target, noise, seed)?;
    let dir = out_dir(&args.common, &cfg)?;

    let csv_path = dir.join("traces.csv");
    let mut w = create(&csv_path)?;
    io::write_traces_csv(&mut w, &traces)?;
    finish(&csv_path, w)?;

    let mut sidecar = TraceSidecar::new(&traces, sim_cfg, target, key, seed, noise);
    sidecar.perturbations = applied;
    let sidecar_json = io::versioned(&sidecar)?;
    write_text(&dir.join("traces.json"), &io::to_pretty(&sidecar_json))?;

    let first = sim.run_cycle(&target.stimulus(&netlist, pts[0], key)?, noise, seed)?;
    let wave_path = dir.join("waveform.csv");
    let mut w = create(&wave_path)?;
    io::write_waveform_csv(&mut w, &first.waveform)?;
    finish(&wave_path, w)?;

    println!(
        "{} runs x {} samples ({} evaluation + {} return-to-zero), key {key:#04x}",
        traces.rows,
        traces.cols,
        traces.eval_samples,
        traces.cols - traces.eval_samples
    );
    Ok(0)
}

pub fn attack(args: &AttackArgs) -> Result<u8> {
    let cfg = ExperimentConfig::load(args.common.config.as_deref())?;
    let sidecar_path = args
        .sidecar
        .clone()
        .unwrap_or_else(|| args.traces.with_extension("json"));
    let sidecar: Option<TraceSidecar> = if sidecar_path.exists() {
        let text = fs::read_to_string(&sidecar_path)
            .with_context(|| format!("reading {}", sidecar_path.display()))?;
        let s: TraceSidecar = serde_json::from_str(&text)
            .map_err(qdi_dpa::Error::from)
            .with_context(|| format!("sidecar {}", sidecar_path.display()))?;
        if s.schema_version != qdi_dpa::SCHEMA_VERSION {
            return Err(qdi_dpa::Error::Schema(format!(
                "sidecar schema_version {} is not {}",
                s.schema_version,
                qdi_dpa::SCHEMA_VERSION
            ))
            .into());
        }
        Some(s)
    } else if args.sidecar.is_some() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("sidecar {} not found", sidecar_path.display()),
        ))
        .context("reading sidecar");
    } else {
        None
    };
    let dt = sidecar.as_ref().map_or(1.0, |s| s.sample_period_ps);
    let split = sidecar.as_ref().map(|s| s.eval_samples);
    let f =
        File::open(&args.traces).with_context(|| format!("opening {}", args.traces.display()))?;
    let traces = io::read_traces_csv(f, dt, split)
        .with_context(|| format!("trace file {}", args.traces.display()))?;

    let spec = cfg.attack.clone().unwrap_or_default();
    let algorithm = match args.algorithm.as_deref() {
        Some(a) => a.parse::<Algorithm>()?,
        None => spec.algorithm.unwrap_or(Algorithm::AesXor),
    };
    let bit = args.bit.or(spec.bit).unwrap_or(0);
    let selection = SelectionFunction::new(algorithm, bit)?;
    let result = run_attack(&traces, selection)?;

    let dir = out_dir(&args.common, &cfg)?;
    write_text(
        &dir.join("dpa.json"),
        &io::to_pretty(&io::dpa_result_json(&result)),
    )?;
    let mut peaks = String::from("guess,peak\n");
    for g in &result.guesses {
        peaks.push_str(&format!(
            "{},{}\n",
            g.guess,
            g.peak.map_or(String::new(), |p| format!("{p:.12}"))
        ));
    }
    write_text(&dir.join("peaks.csv"), &peaks)?;
    if let Some(g) = &args.bias_dump {
        let guess = parse_key(g)?;
        let path = dir.join(format!("bias_{guess:02x}.csv"));
        let mut w = create(&path)?;
        io::write_bias_csv(&mut w, &result, guess, dt)?;
        finish(&path, w)?;
    }
    let top = result.ranking[0];
    let r = &result.guesses[top as usize];
    if result.conclusive {
        println!(
            "top guess {top:#04x} peak {:.3} uA ({} guesses share rank 1)",
            r.peak.unwrap_or(0.0),
            result.top_tie_count()
        );
    } else {
        println!(
            "inconclusive: no guess has a peak above {} uA",
            qdi_dpa::dpa::INCONCLUSIVE_PEAK_UA
        );
    }
    Ok(0)
}

fn placement_defaults(mode: PlacementMode, seed: u64, cfg: &ExperimentConfig) -> PlacementParams {
    let spec = cfg.placement.as_ref();
    let chosen = match mode {
        PlacementMode::Flat => spec.and_then(|p| p.flat),
        PlacementMode::Hierarchical => spec.and_then(|p| p.hierarchical),
    };
    PlacementParams {
        seed,
        ..chosen.unwrap_or_else(|| PlacementParams::defaults(mode, seed))
    }
}

pub fn dissym(netlist: Option<&str>, placement: Option<Mode>, common: &Common) -> Result<u8> {
    let cfg = ExperimentConfig::load(common.config.as_deref())?;
    let source = cfg.netlist_source(netlist, None)?;
    let mut n = load_netlist(&source)?;
    let mut placed = None;
    if let Some(mode) = placement {
        let mode = match mode {
            Mode::Flat => PlacementMode::Flat,
            Mode::Hierarchical => PlacementMode::Hierarchical,
        };
        let seed = seed_of(common, &cfg, "placement")?;
        let params = placement_defaults(mode, seed, &cfg);
        n = dissym::assign_capacitances(&n, &params)?;
        placed = Some(params);
    }
    let report = dissym::report(&n)?;
    let dir = out_dir(common, &cfg)?;
    let mut v = io::versioned(&report)?;
    v["netlist"] = json!(source);
    v["placement"] = json!(placed);
    write_text(&dir.join("dissym.json"), &io::to_pretty(&v))?;
    write_text(&dir.join("dissym.txt"), &report.to_table())?;
    let rails = report
        .entries
        .iter()
        .map(|e| e.rail_caps_ff.len())
        .max()
        .unwrap_or(2);
    let mut csv = String::from("channel");
    for r in 0..rails {
        csv.push_str(&format!(",C{r}_fF"));
    }
    csv.push_str(",d_A\n");
    for e in &report.entries {
        csv.push_str(&e.channel);
        for r in 0..rails {
            csv.push(',');
            if let Some(c) = e.rail_caps_ff.get(r) {
                csv.push_str(&format!("{c:.12}"));
            }
        }
        csv.push_str(&format!(",{:.12}\n", e.d_a));
    }
    write_text(&dir.join("dissym.csv"), &csv)?;
    print!("{}", report.to_table());
    Ok(0)
}

pub fn pnr_compare(netlist: Option<&str>, seeds: Option<usize>, common: &Common) -> Result<u8> {
    let cfg = ExperimentConfig::load(common.config.as_deref())?;
    let source = cfg.netlist_source(netlist, Some(BUILTIN_ARK))?;
    let n = load_netlist(&source)?;
    let seed = seed_of(common, &cfg, "pnr-compare")?;
    let n_seeds = seeds
        .or_else(|| cfg.placement.as_ref().and_then(|p| p.n_seeds))
        .unwrap_or(100);
    let flat = placement_defaults(PlacementMode::Flat, seed, &cfg);
    let hier = placement_defaults(PlacementMode::Hierarchical, seed, &cfg);
    let c = dissym::compare_flows(&n, &flat, &hier, n_seeds)?;
    let dir = out_dir(common, &cfg)?;
    let mut v = io::versioned(&c)?;
    v["netlist"] = json!(source);
    v["flat_params"] = json!(flat);
    v["hierarchical_params"] = json!(hier);
    write_text(&dir.join("pnr_compare.json"), &io::to_pretty(&v))?;
    let mut csv = String::from("seed,flat_max_d_A,hierarchical_max_d_A\n");
    for (s, (f, h)) in c
        .flat
        .max_d_a
        .iter()
        .zip(&c.hierarchical.max_d_a)
        .enumerate()
    {
        csv.push_str(&format!(
            "{},{f:.12},{h:.12}\n",
            seed.wrapping_add(s as u64)
        ));
    }
    write_text(&dir.join("flows.csv"), &csv)?;
    println!(
        "max d_A median: flat {:.4}, hierarchical {:.4}; flat worse in {}/{} seeds; area ratio {:.2}",
        c.flat.median, c.hierarchical.median, c.flat_worse, c.n_seeds, c.area_ratio
    );
    Ok(0)
}
