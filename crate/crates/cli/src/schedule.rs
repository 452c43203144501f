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

//! `mcnn schedule`: rebuild the cyclic schedule and its configuration table.

use std::path::Path;

use mcnn_core::hsched::{build_config_table, DEFAULT_MAX_SLOTS_TOTAL};
use mcnn_core::model::{parse_platform, PlatformSpec};
use mcnn_core::optimizer::{build_tasks, schedule_tasks, SchedulerKind};
use mcnn_core::pareto::JointDesignPoint;
use mcnn_core::sched::{rcls, violations, CyclicSchedule, TaskInstance, ViolationReport};

use crate::artifacts::{self, read_json, read_text, write_json};
use crate::dse::SlowDownFile;
use crate::error::{CliError, CliResult};

pub struct ScheduleArgs<'a> {
    pub sigma: &'a Path,
    pub sl: &'a Path,
    pub platform: &'a Path,
    pub out: &'a Path,
    pub scheduler: SchedulerKind,
    pub quantum_s: Option<f64>,
}

fn describe(tasks: &[TaskInstance], report: &ViolationReport) -> String {
    let mut s = String::new();
    for i in report.violating() {
        let t = &tasks[i];
        s.push_str(&format!(
            "  cnn {} rep {} subgraph {}: demand peaks at {:.4} x b_mem (sl {:.4}, b' {:.4e} B/s)\n",
            t.cnn, t.rep_index, t.subgraph, report.overshoot[i], t.sl, t.bandwidth
        ));
    }
    if let Some(w) = report.worst {
        s.push_str(&format!("  worst interval [{:.6e}, {:.6e}) s at {:.4} x b_mem\n", w.start_s, w.end_s, w.ratio));
    }
    s
}

pub fn load_sigma(path: &Path) -> CliResult<JointDesignPoint> {
    read_json(path, "joint design point")
}

pub fn load_platform(path: &Path) -> CliResult<PlatformSpec> {
    Ok(parse_platform(&read_text(path, "platform")?)?)
}

pub fn cmd_schedule(args: &ScheduleArgs) -> CliResult<String> {
    let sigma = load_sigma(args.sigma)?;
    let sl: SlowDownFile = read_json(args.sl, "slow-down")?;
    let platform = load_platform(args.platform)?;
    if sl.rep.len() != sigma.points.len() {
        return Err(CliError::Input(format!(
            "slow-down file has {} repetition counts for {} networks",
            sl.rep.len(),
            sigma.points.len()
        )));
    }
    let tasks = sl.sl.apply(&build_tasks(&sigma, &sl.rep)?)?;
    let schedule: CyclicSchedule = match schedule_tasks(&tasks, platform.b_mem, args.scheduler, args.quantum_s) {
        Ok(s) => s,
        Err(mcnn_core::Error::Infeasible(msg)) => {
            let free = rcls(&tasks, platform.b_mem, false)?;
            let report = violations(&free, platform.b_mem);
            return Err(CliError::Unschedulable(format!("{msg}\n{}", describe(&tasks, &report))));
        }
        Err(e) => return Err(e.into()),
    };
    let report = violations(&schedule, platform.b_mem);
    if !report.is_clean() {
        return Err(CliError::Unschedulable(describe(&schedule.tasks, &report)));
    }
    let table = build_config_table(&schedule, &sigma, &platform, DEFAULT_MAX_SLOTS_TOTAL)?;
    artifacts::ensure_dir(args.out)?;
    write_json(args.out, artifacts::SCHEDULE, &schedule)?;
    write_json(args.out, artifacts::HS_TABLE, &table)?;
    let rates: Vec<String> = (0..sigma.points.len()).map(|i| format!("{:.3}", schedule.fps(i))).collect();
    Ok(format!(
        "cycle time {:.6e} s, {} tasks, fps [{}]; written to {}\n",
        schedule.cycle_time_s,
        schedule.tasks.len(),
        rates.join(", "),
        args.out.display()
    ))
}
