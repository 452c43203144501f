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

//! `mcnn simulate`: run one arbitration policy over a joint design point.

use std::path::Path;

use clap::ValueEnum;
use mcnn_core::hsched::HsConfigTable;
use mcnn_core::sim::{simulate, SimConfig, SimOptions, SimPolicy};

use crate::artifacts::{self, read_json, write_json};
use crate::error::{CliError, CliResult};
use crate::schedule::{load_platform, load_sigma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    /// Table-driven round-robin slots from a configuration table.
    Aware,
    /// Asynchronous access with contention.
    Unaware,
}

pub struct SimulateArgs<'a> {
    pub sigma: &'a Path,
    pub platform: &'a Path,
    pub table: Option<&'a Path>,
    pub policy: PolicyArg,
    pub frames: u32,
    pub seed: u64,
    pub trace: bool,
    pub out: &'a Path,
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<String> {
    let sigma = load_sigma(args.sigma)?;
    let platform = load_platform(args.platform)?;
    let (policy, name) = match (args.policy, args.table) {
        (PolicyArg::Aware, Some(path)) => {
            let table: HsConfigTable = read_json(path, "configuration table")?;
            (SimPolicy::MemoryAware(table), artifacts::SIM_AWARE)
        }
        (PolicyArg::Aware, None) => {
            return Err(CliError::Input("the memory-aware policy needs --table".into()));
        }
        (PolicyArg::Unaware, _) => (SimPolicy::ContentionUnaware, artifacts::SIM_UNAWARE),
    };
    let options =
        SimOptions { duration_frames: args.frames, seed: args.seed, trace: args.trace, ..SimOptions::default() };
    let result = simulate(&sigma, &SimConfig { policy, options }, &platform)?;
    artifacts::ensure_dir(args.out)?;
    let path = write_json(args.out, name, &result)?;
    let rates: Vec<String> = result.fps.iter().map(|f| format!("{f:.3}")).collect();
    Ok(format!("fps [{}]; written to {}\n", rates.join(", "), path.display()))
}
