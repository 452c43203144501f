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

//! Reading inputs and writing run artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const FRONTS: &str = "fronts.json";
pub const JOINTS: &str = "joints.json";
pub const NETWORKS: &str = "networks.json";
pub const OBJECTIVE: &str = "objective.json";
pub const DSE: &str = "dse.json";
pub const SIGMA: &str = "sigma.json";
pub const SLOWDOWNS: &str = "sl.json";
pub const SCHEDULE: &str = "schedule.json";
pub const HS_TABLE: &str = "hs_table.json";
pub const SIM_UNAWARE: &str = "sim_unaware.json";
pub const SIM_AWARE: &str = "sim_aware.json";
pub const TRIPLES: &str = "triples.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";

/// Artifacts `report` needs from a `dse` run.
pub const REPORT_INPUTS: [&str; 4] = [NETWORKS, OBJECTIVE, SIM_UNAWARE, SIM_AWARE];

pub fn read_text(path: &Path, what: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Input(format!("{what} file not found: {}", path.display())),
        _ => CliError::Input(format!("cannot read {what} file {}: {e}", path.display())),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = read_text(path, what)?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("malformed {what} file {}: {e}", path.display())))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| CliError::Write { path: path.clone(), source })?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serialisation cannot fail");
    text.push('\n');
    write_text(dir, name, &text)
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })
}

/// Shortest round-trip formatting, so CSV values parse back exactly.
pub fn num(x: f64) -> String {
    format!("{x}")
}
