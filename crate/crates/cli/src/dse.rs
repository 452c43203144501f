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

//! `mcnn dse`: fronts, joint set, memory-aware exploration and both simulations.

use mcnn_core::hsched::{build_config_table, DEFAULT_MAX_SLOTS_TOTAL};
use mcnn_core::model::NetworkSpec;
use mcnn_core::optimizer::{
    derive_references, evaluate_schedule, full_bandwidth_fps, memory_aware_dse, CnnRate, DseConfig, JointEvaluation,
    Objective, PsConfig, RepMode, SchedulerKind,
};
use mcnn_core::pareto::{enumerate_joint, enumerate_points, pareto_front, DesignPoint, JointDesignPoint, PointLimits};
use mcnn_core::sched::SlowDownVector;
use mcnn_core::sdf::ResourceVector;
use mcnn_core::sim::{simulate, SimConfig, SimOptions, SimPolicy, SimResult};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, num, write_json, write_text};
use crate::error::{CliError, CliResult};
use crate::manifest::{Knobs, RunManifest};

#[derive(Debug, Serialize)]
struct Front<'a> {
    network: &'a str,
    points: &'a [DesignPoint],
}

#[derive(Debug, Serialize)]
struct JointSummary<'a> {
    index: usize,
    front_indices: &'a [usize],
    rsc: ResourceVector,
}

/// Name and per-frame work of each network, in run order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInfo {
    pub name: String,
    pub ops: u64,
    pub fps_target: Option<f64>,
}

/// Repetitions and slow-downs of the chosen joint point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowDownFile {
    pub rep: Vec<u32>,
    pub sl: SlowDownVector,
}

#[derive(Debug, Serialize)]
struct DseSummary<'a> {
    sigma_index: usize,
    front_indices: &'a [usize],
    objective_value: f64,
    per_cnn: &'a [CnnRate],
    evaluations: &'a [JointEvaluation],
}

/// Predicted, contention-unaware and memory-aware objective of one joint point.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub joint_index: usize,
    pub rep: Vec<u32>,
    pub predicted: f64,
    pub unaware: f64,
    pub aware: f64,
}

pub fn dse_config(k: &Knobs) -> DseConfig {
    DseConfig {
        scheduler: k.scheduler,
        quantum_s: k.quantum_s,
        ps: PsConfig { initial_step: k.ps_step, ..PsConfig::default() },
        rep: if k.max_rep > 1 { RepMode::Search { max_rep: k.max_rep } } else { RepMode::Uniform },
    }
}

pub fn sim_options(k: &Knobs) -> SimOptions {
    SimOptions { duration_frames: k.frames, seed: k.seed, trace: k.trace, ..SimOptions::default() }
}

fn fronts(nets: &[NetworkSpec], platform: &mcnn_core::model::PlatformSpec, k: &Knobs) -> CliResult<Vec<Vec<DesignPoint>>> {
    let limits = PointLimits { max_subgraphs: k.max_subgraphs, max_n_pe: k.max_n_pe, max_n_op: k.max_n_op, ..PointLimits::default() };
    nets.iter().map(|net| Ok(pareto_front(&enumerate_points(net, platform, &limits)?))).collect()
}

fn check_exact_guard(joints: &[JointDesignPoint], k: &Knobs) -> CliResult<()> {
    if k.scheduler != SchedulerKind::Exact {
        return Ok(());
    }
    for (i, j) in joints.iter().enumerate() {
        let tasks: usize = j.points.iter().map(|p| p.metrics.len() * k.max_rep as usize).sum();
        if tasks > k.exact_task_limit {
            return Err(CliError::Input(format!(
                "joint point {i} has up to {tasks} tasks, above the exact scheduler limit of {}",
                k.exact_task_limit
            )));
        }
    }
    Ok(())
}

fn best_evaluation(evals: &[JointEvaluation], joint: usize) -> Option<&JointEvaluation> {
    evals
        .iter()
        .filter(|e| e.joint_index == joint)
        .fold(None, |best: Option<&JointEvaluation>, e| match best {
            Some(b) if b.objective <= e.objective => Some(b),
            _ => Some(e),
        })
}

/// Simulates one joint point under both policies. The memory-aware side uses
/// the slow-downs found for it during exploration; it is `inf` when that
/// point could not be scheduled.
fn triple(
    index: usize,
    sigma: &JointDesignPoint,
    eval: &JointEvaluation,
    obj: &Objective,
    platform: &mcnn_core::model::PlatformSpec,
    cfg: &DseConfig,
    options: &SimOptions,
) -> CliResult<Triple> {
    let unaware = simulate(sigma, &SimConfig { policy: SimPolicy::ContentionUnaware, options: options.clone() }, platform)?;
    let aware = match evaluate_schedule(sigma, &eval.rep, &eval.sl, obj, platform.b_mem, cfg) {
        Ok((_, schedule)) => {
            let table = build_config_table(&schedule, sigma, platform, DEFAULT_MAX_SLOTS_TOTAL)?;
            let r = simulate(sigma, &SimConfig { policy: SimPolicy::MemoryAware(table), options: options.clone() }, platform)?;
            obj.score(&r.fps)
        }
        Err(_) => f64::INFINITY,
    };
    Ok(Triple {
        joint_index: index,
        rep: eval.rep.clone(),
        predicted: obj.score(&full_bandwidth_fps(sigma)),
        unaware: obj.score(&unaware.fps),
        aware,
    })
}

fn triples_csv(triples: &[Triple], joints: &[JointDesignPoint]) -> String {
    let mut out = String::from("joint_index,front_indices,rep,predicted,unaware,aware\n");
    for t in triples {
        let join = |v: &[String]| v.join(" ");
        let fi: Vec<String> = joints[t.joint_index].front_indices.iter().map(usize::to_string).collect();
        let rep: Vec<String> = t.rep.iter().map(u32::to_string).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.joint_index,
            join(&fi),
            join(&rep),
            num(t.predicted),
            num(t.unaware),
            num(t.aware)
        ));
    }
    out
}

pub fn cmd_dse(manifest: &RunManifest) -> CliResult<String> {
    let (nets, platform) = manifest.load_inputs()?;
    let k = &manifest.knobs;
    let out = &manifest.out;
    artifacts::ensure_dir(out)?;

    let fronts = fronts(&nets, &platform, k)?;
    let listed: Vec<Front> = nets.iter().zip(&fronts).map(|(n, f)| Front { network: &n.name, points: f }).collect();
    write_json(out, artifacts::FRONTS, &listed)?;

    let joints = enumerate_joint(&fronts, &platform.rsc_avail, k.joint_cap)?;
    let summary: Vec<JointSummary> = joints
        .iter()
        .enumerate()
        .map(|(index, j)| JointSummary { index, front_indices: &j.front_indices, rsc: j.total_rsc() })
        .collect();
    write_json(out, artifacts::JOINTS, &summary)?;
    check_exact_guard(&joints, k)?;

    let obj = Objective::new(manifest.objective, &nets, derive_references(&nets, &fronts)?)?;
    let info: Vec<NetworkInfo> =
        nets.iter().map(|n| NetworkInfo { name: n.name.clone(), ops: n.ops(), fps_target: n.fps_target }).collect();
    write_json(out, artifacts::NETWORKS, &info)?;
    write_json(out, artifacts::OBJECTIVE, &obj)?;

    let cfg = dse_config(k);
    let result = memory_aware_dse(&joints, &obj, platform.b_mem, &cfg)?;
    write_json(
        out,
        artifacts::DSE,
        &DseSummary {
            sigma_index: result.sigma_index,
            front_indices: &result.sigma_star.front_indices,
            objective_value: result.objective_value,
            per_cnn: &result.per_cnn,
            evaluations: &result.evaluations,
        },
    )?;
    write_json(out, artifacts::SIGMA, &result.sigma_star)?;
    write_json(out, artifacts::SLOWDOWNS, &SlowDownFile { rep: result.schedule.rep.clone(), sl: result.sl_star.clone() })?;
    write_json(out, artifacts::SCHEDULE, &result.schedule)?;
    let table = build_config_table(&result.schedule, &result.sigma_star, &platform, DEFAULT_MAX_SLOTS_TOTAL)?;
    write_json(out, artifacts::HS_TABLE, &table)?;

    let options = sim_options(k);
    let sigma = &result.sigma_star;
    let unaware: SimResult =
        simulate(sigma, &SimConfig { policy: SimPolicy::ContentionUnaware, options: options.clone() }, &platform)?;
    let aware = simulate(sigma, &SimConfig { policy: SimPolicy::MemoryAware(table), options: options.clone() }, &platform)?;
    write_json(out, artifacts::SIM_UNAWARE, &unaware)?;
    write_json(out, artifacts::SIM_AWARE, &aware)?;

    let mut triples = Vec::with_capacity(joints.len());
    for (i, j) in joints.iter().enumerate() {
        let eval = best_evaluation(&result.evaluations, i).expect("every joint point is evaluated");
        triples.push(triple(i, j, eval, &obj, &platform, &cfg, &options)?);
    }
    write_text(out, artifacts::TRIPLES, &triples_csv(&triples, &joints))?;

    let mut msg = format!(
        "chose joint point {} of {} (objective {:.6})\n",
        result.sigma_index,
        joints.len(),
        result.objective_value
    );
    for ((net, rate), (u, a)) in nets.iter().zip(&result.per_cnn).zip(unaware.fps.iter().zip(&aware.fps)) {
        msg.push_str(&format!(
            "  {}: scheduled {:.3} fps ({:.3} GOp/s), simulated {:.3} fps memory-aware, {:.3} fps contention-unaware\n",
            net.name, rate.fps, rate.gops, a, u
        ));
    }
    msg.push_str(&format!("artifacts written to {}\n", out.display()));
    Ok(msg)
}
