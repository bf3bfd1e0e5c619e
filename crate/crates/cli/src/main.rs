// SPDX-License-Identifier: Apache-2.0

//! `qdi-dpa`: command-line front end of the QDI side-channel workbench.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "qdi-dpa",
    version,
    about = "Gate-level DPA workbench for QDI dual-rail circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Experiment configuration (JSON); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Electrical parameters (JSON); overrides the config's `params`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a netlist.
    Check {
        /// Netlist path or builtin:dims-xor / builtin:add-round-key.
        netlist: String,
    },
    /// Graph metrics, levelization and balance verification.
    #[command(alias = "graph")]
    Analyze {
        netlist: Option<String>,
        /// Also write graph.dot.
        #[arg(long)]
        dot: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate one four-phase cycle per plaintext and write the traces.
    Simulate(SimulateArgs),
    /// Run the DPA attack on a trace CSV.
    Attack(AttackArgs),
    /// Rail dissymmetry report, optionally after a seeded placement.
    Dissym {
        netlist: Option<String>,
        #[arg(long, value_enum)]
        placement: Option<Mode>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare flat and hierarchical placement over many seeds.
    PnrCompare {
        netlist: Option<String>,
        /// Number of seeds.
        #[arg(long)]
        seeds: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Render an SVG from CSV inputs.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub netlist: Option<String>,
    /// dims-xor or add-round-key.
    #[arg(long)]
    pub target: Option<String>,
    /// Embedded key byte (hex).
    #[arg(long)]
    pub key: Option<String>,
    /// exhaustive, random:N or file:PATH.
    #[arg(long)]
    pub plaintexts: Option<String>,
    /// Capacitance perturbation, e.g. c_l31=2x or c0=1.5x; repeatable.
    #[arg(long)]
    pub perturb: Vec<String>,
    /// XOR slice that c_lXY positions refer to in the AddRoundKey bank.
    #[arg(long)]
    pub slice: Option<usize>,
    /// Rail imbalance CHANNEL=D_A applied to rail 1; repeatable.
    #[arg(long)]
    pub imbalance: Vec<String>,
    /// Gaussian noise per sample (uA).
    #[arg(long)]
    pub noise: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    /// Trace CSV written by `simulate`.
    #[arg(long)]
    pub traces: PathBuf,
    /// Sidecar JSON; defaults to the trace path with a .json extension.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// aes-xor or des-sbox1.
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Target bit of the selection function.
    #[arg(long)]
    pub bit: Option<u8>,
    /// Also write the bias signal of this guess (hex).
    #[arg(long)]
    pub bias_dump: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[arg(value_enum)]
    pub kind: PlotKind,
    /// Input CSV; repeat for overlays.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub title: Option<String>,
    /// Omit the generator comment so output is byte-stable across versions.
    #[arg(long)]
    pub reproducible: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Flat,
    Hierarchical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Waveform,
    BiasOverlay,
    #[value(name = "dA-histogram", alias = "da-histogram")]
    DaHistogram,
    PeakVsGuess,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<config::UsageError>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some()
        {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<qdi_dpa::Error>() {
            return match e {
                qdi_dpa::Error::Io(_) => 2,
                qdi_dpa::Error::Csv(c) if c.is_io_error() => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { netlist } => commands::check(&netlist),
        Command::Analyze {
            netlist,
            dot,
            common,
        } => commands::analyze(netlist.as_deref(), dot, &common),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Attack(args) => commands::attack(&args),
        Command::Dissym {
            netlist,
            placement,
            common,
        } => commands::dissym(netlist.as_deref(), placement, &common),
        Command::PnrCompare {
            netlist,
            seeds,
            common,
        } => commands::pnr_compare(netlist.as_deref(), seeds, &common),
        Command::Plot(args) => plot::run(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
