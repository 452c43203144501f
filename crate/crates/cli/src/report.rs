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

//! `mcnn report`: per-network throughput of both policies and the overall gain.

use std::path::Path;

use mcnn_core::optimizer::Objective;
use mcnn_core::sim::{geo_mean_speedup, objective_gain_percent, SimResult};

use crate::artifacts::{self, num, read_json, write_text};
use crate::dse::NetworkInfo;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub baseline_fps: f64,
    pub aware_fps: f64,
    pub baseline_gops: f64,
    pub aware_gops: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub speedup: f64,
    pub baseline_objective: f64,
    pub aware_objective: f64,
    pub gain_percent: f64,
}

pub fn build_report(nets: &[NetworkInfo], obj: &Objective, baseline: &SimResult, aware: &SimResult) -> CliResult<Report> {
    let n = nets.len();
    if obj.ops.len() != n || baseline.fps.len() != n || aware.fps.len() != n {
        return Err(CliError::Input("run artifacts disagree on the number of networks".into()));
    }
    let rows = nets
        .iter()
        .enumerate()
        .map(|(i, net)| ReportRow {
            name: net.name.clone(),
            baseline_fps: baseline.fps[i],
            aware_fps: aware.fps[i],
            baseline_gops: net.ops as f64 * baseline.fps[i] / 1e9,
            aware_gops: net.ops as f64 * aware.fps[i] / 1e9,
        })
        .collect();
    let baseline_objective = obj.score(&baseline.fps);
    let aware_objective = obj.score(&aware.fps);
    Ok(Report {
        rows,
        speedup: geo_mean_speedup(&baseline.fps, &aware.fps)?,
        baseline_objective,
        aware_objective,
        gain_percent: objective_gain_percent(baseline_objective, aware_objective),
    })
}

fn to_text(r: &Report) -> String {
    let mut s = format!(
        "{:<16} {:>14} {:>14} {:>14} {:>14} {:>9}\n",
        "network", "baseline fps", "aware fps", "baseline GOp/s", "aware GOp/s", "ratio"
    );
    for row in &r.rows {
        s.push_str(&format!(
            "{:<16} {:>14.3} {:>14.3} {:>14.3} {:>14.3} {:>9.3}\n",
            row.name,
            row.baseline_fps,
            row.aware_fps,
            row.baseline_gops,
            row.aware_gops,
            row.aware_fps / row.baseline_fps
        ));
    }
    s.push_str(&format!("speed-up (geometric mean): {:.4}\n", r.speedup));
    s.push_str(&format!(
        "objective: baseline {:.6}, memory-aware {:.6}, gain {:.2}%\n",
        r.baseline_objective, r.aware_objective, r.gain_percent
    ));
    s
}

fn to_csv(r: &Report) -> String {
    let mut s = String::from("network,baseline_fps,aware_fps,baseline_gops,aware_gops,ratio\n");
    for row in &r.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.name,
            num(row.baseline_fps),
            num(row.aware_fps),
            num(row.baseline_gops),
            num(row.aware_gops),
            num(row.aware_fps / row.baseline_fps)
        ));
    }
    s
}

pub fn cmd_report(run: &Path) -> CliResult<String> {
    let missing: Vec<&str> = artifacts::REPORT_INPUTS.iter().copied().filter(|f| !run.join(f).is_file()).collect();
    if !missing.is_empty() {
        return Err(CliError::Input(format!(
            "run directory {} is incomplete; missing {}",
            run.display(),
            missing.join(", ")
        )));
    }
    let nets: Vec<NetworkInfo> = read_json(&run.join(artifacts::NETWORKS), "network list")?;
    let obj: Objective = read_json(&run.join(artifacts::OBJECTIVE), "objective")?;
    let baseline: SimResult = read_json(&run.join(artifacts::SIM_UNAWARE), "simulation result")?;
    let aware: SimResult = read_json(&run.join(artifacts::SIM_AWARE), "simulation result")?;
    let report = build_report(&nets, &obj, &baseline, &aware)?;
    let text = to_text(&report);
    write_text(run, artifacts::REPORT_TXT, &text)?;
    write_text(run, artifacts::REPORT_CSV, &to_csv(&report))?;
    Ok(text)
}
