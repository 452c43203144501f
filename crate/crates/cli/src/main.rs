// Copyright 2026 The mcnn-dse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `mcnn`: design-space exploration, scheduling and simulation of
//! multi-CNN FPGA mappings.

mod artifacts;
mod dse;
mod error;
mod manifest;
mod report;
mod schedule;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcnn_core::optimizer::{ObjectiveKind, SchedulerKind};

use crate::error::CliResult;
use crate::manifest::{parse_fps_targets, Knobs, RunManifest};
use crate::simulate::PolicyArg;

#[derive(Debug, Parser)]
#[command(name = "mcnn", version, about = "Multi-CNN FPGA mapping: exploration, scheduling and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Fps,
    Maxthrpt,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchedulerArg {
    Rcls,
    Exact,
}

impl From<SchedulerArg> for SchedulerKind {
    fn from(s: SchedulerArg) -> Self {
        match s {
            SchedulerArg::Rcls => SchedulerKind::Rcls,
            SchedulerArg::Exact => SchedulerKind::Exact,
        }
    }
}

#[derive(Debug, Args)]
struct DseArgs {
    /// TOML run manifest; replaces the input flags below.
    #[arg(long, conflicts_with_all = ["networks", "platform"])]
    manifest: Option<PathBuf>,
    #[arg(long, num_args = 1.., required_unless_present = "manifest")]
    networks: Vec<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    platform: Option<PathBuf>,
    /// Objective; `fps` unless the manifest says otherwise.
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    /// Frame-rate targets as NAME=VALUE.
    #[arg(long = "fps-target", num_args = 1..)]
    fps_targets: Vec<String>,
    /// Output directory; `out` unless the manifest says otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_subgraphs: Option<usize>,
    /// Largest processing-element fold considered per layer.
    #[arg(long)]
    max_n_pe: Option<u32>,
    /// Largest operator fold considered per layer.
    #[arg(long)]
    max_n_op: Option<u32>,
    /// Front points per network considered for joint designs.
    #[arg(long)]
    joint_cap: Option<usize>,
    #[arg(long)]
    max_rep: Option<u32>,
    #[arg(long)]
    ps_step: Option<f64>,
    #[arg(long, value_enum)]
    scheduler: Option<SchedulerArg>,
    /// Time quantum in seconds for the schedulers.
    #[arg(long)]
    quantum: Option<f64>,
    #[arg(long)]
    frames: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record grant and execution events in the simulation results.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Explore designs, schedule the best joint point and simulate both policies.
    Dse(Box<DseArgs>),
    /// Rebuild the schedule and configuration table from saved slow-downs.
    Schedule {
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long)]
        sl: PathBuf,
        #[arg(long)]
        platform: PathBuf,
        #[arg(long, value_enum, default_value = "rcls")]
        scheduler: SchedulerArg,
        #[arg(long)]
        quantum: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulate a joint design point under one arbitration policy.
    Simulate {
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long)]
        platform: PathBuf,
        #[arg(long, value_enum)]
        policy: PolicyArg,
        /// Configuration table, required by the memory-aware policy.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        frames: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trace: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Summarise a dse run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn manifest_from(a: &DseArgs) -> CliResult<RunManifest> {
    let mut m = match &a.manifest {
        Some(path) => RunManifest::load(path)?,
        None => RunManifest {
            networks: a.networks.clone(),
            platform: a.platform.clone().expect("required by clap"),
            objective: ObjectiveKind::Fps,
            fps_targets: Default::default(),
            out: PathBuf::from("out"),
            knobs: Knobs::default(),
        },
    };
    // explicit flags win over the manifest
    if let Some(o) = a.objective {
        m.objective = match o {
            ObjectiveArg::Fps => ObjectiveKind::Fps,
            ObjectiveArg::Maxthrpt => ObjectiveKind::MaxThrpt,
        };
    }
    if let Some(out) = &a.out {
        m.out = out.clone();
    }
    m.fps_targets.extend(parse_fps_targets(&a.fps_targets)?);
    let k = &mut m.knobs;
    k.max_subgraphs = a.max_subgraphs.unwrap_or(k.max_subgraphs);
    k.max_n_pe = a.max_n_pe.or(k.max_n_pe);
    k.max_n_op = a.max_n_op.or(k.max_n_op);
    k.joint_cap = a.joint_cap.or(k.joint_cap);
    k.max_rep = a.max_rep.unwrap_or(k.max_rep);
    k.ps_step = a.ps_step.unwrap_or(k.ps_step);
    k.scheduler = a.scheduler.map_or(k.scheduler, Into::into);
    k.quantum_s = a.quantum.or(k.quantum_s);
    k.frames = a.frames.unwrap_or(k.frames);
    k.seed = a.seed.unwrap_or(k.seed);
    k.trace |= a.trace;
    Ok(m)
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Dse(a) => dse::cmd_dse(&manifest_from(&a)?),
        Command::Schedule { sigma, sl, platform, scheduler, quantum, out } => {
            schedule::cmd_schedule(&schedule::ScheduleArgs {
                sigma: &sigma,
                sl: &sl,
                platform: &platform,
                out: &out,
                scheduler: scheduler.into(),
                quantum_s: quantum,
            })
        }
        Command::Simulate { sigma, platform, policy, table, frames, seed, trace, out } => {
            simulate::cmd_simulate(&simulate::SimulateArgs {
                sigma: &sigma,
                platform: &platform,
                table: table.as_deref(),
                policy,
                frames,
                seed,
                trace,
                out: &out,
            })
        }
        Command::Report { run } => report::cmd_report(&run),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(msg) => {
            print!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
