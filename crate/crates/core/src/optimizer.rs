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

//! Schedule-quality objectives, pattern search over slow-downs and the
//! memory-aware exploration loop over joint design points.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::NetworkSpec;
use crate::pareto::{DesignPoint, JointDesignPoint};
use crate::sched::{
    exact_schedule, propose_slowdowns, quantize, rcls, violations, CyclicSchedule, SlowDownVector, TaskInstance,
    SLOWDOWN_FLOOR,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    /// Squared relative distance of each network's frame rate from its target.
    Fps,
    /// Squared relative distance of each network's throughput from its maximum.
    MaxThrpt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub fps_max: f64,
    /// Operations per second at `fps_max`.
    pub t_max: f64,
}

/// Standalone references of each network: its fastest front point with the
/// whole device and bandwidth to itself.
pub fn derive_references(nets: &[NetworkSpec], fronts: &[Vec<DesignPoint>]) -> Result<Vec<References>> {
    if nets.len() != fronts.len() {
        return Err(Error::Internal("one front per network expected".into()));
    }
    nets.iter()
        .zip(fronts)
        .map(|(net, front)| {
            let best = front.iter().map(|p| p.latency_s).fold(f64::INFINITY, f64::min);
            if !(best.is_finite() && best > 0.0) {
                return Err(Error::Infeasible(format!("network '{}' has no usable design point", net.name)));
            }
            let fps_max = 1.0 / best;
            Ok(References { fps_max, t_max: net.ops() as f64 * fps_max })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub fps_user: Vec<Option<f64>>,
    pub references: Vec<References>,
    /// Operations per frame of each network.
    pub ops: Vec<u64>,
}

impl Objective {
    pub fn new(kind: ObjectiveKind, nets: &[NetworkSpec], references: Vec<References>) -> Result<Objective> {
        if references.len() != nets.len() {
            return Err(Error::Internal("one reference per network expected".into()));
        }
        for (net, r) in nets.iter().zip(&references) {
            if !(r.fps_max > 0.0 && r.t_max > 0.0) {
                return Err(Error::Validation(format!("references of '{}' must be positive", net.name)));
            }
            if let Some(f) = net.fps_target {
                if !(f.is_finite() && f > 0.0) {
                    return Err(Error::Validation(format!("fps_target of '{}' must be positive, got {f}", net.name)));
                }
            }
        }
        Ok(Objective {
            kind,
            fps_user: nets.iter().map(|n| n.fps_target).collect(),
            references,
            ops: nets.iter().map(NetworkSpec::ops).collect(),
        })
    }

    pub fn fps_target(&self, i: usize) -> f64 {
        let max = self.references[i].fps_max;
        self.fps_user[i].map_or(max, |u| u.min(max))
    }

    /// Objective value for achieved frame rates; lower is better.
    pub fn score(&self, fps: &[f64]) -> f64 {
        fps.iter()
            .enumerate()
            .map(|(i, &f)| {
                let rel = match self.kind {
                    ObjectiveKind::Fps => (f - self.fps_target(i)) / self.fps_target(i),
                    ObjectiveKind::MaxThrpt => {
                        let t_max = self.references[i].t_max;
                        (self.ops[i] as f64 * f - t_max) / t_max
                    }
                };
                rel * rel
            })
            .sum()
    }

    pub fn score_schedule(&self, schedule: &CyclicSchedule) -> f64 {
        let fps: Vec<f64> = (0..self.ops.len()).map(|i| schedule.fps(i)).collect();
        self.score(&fps)
    }
}

/// Frame rate each network would reach with exclusive use of the full
/// memory bandwidth: one pass over its subgraphs per frame.
pub fn full_bandwidth_fps(sigma: &JointDesignPoint) -> Vec<f64> {
    sigma.points.iter().map(|p| 1.0 / p.metrics.iter().map(|m| m.latency_s).sum::<f64>()).collect()
}

/// The joint point a bandwidth-oblivious flow would pick, with its predicted
/// objective value. Ties go to the earlier joint.
pub fn contention_unaware_choice(joints: &[JointDesignPoint], obj: &Objective) -> Option<(usize, f64)> {
    joints
        .iter()
        .enumerate()
        .map(|(i, j)| (i, obj.score(&full_bandwidth_fps(j))))
        .fold(None, |best, (i, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((i, v)),
        })
}

/// Executions of every subgraph in one cycle, ordered by network, repetition
/// and subgraph.
pub fn build_tasks(sigma: &JointDesignPoint, rep: &[u32]) -> Result<Vec<TaskInstance>> {
    if rep.len() != sigma.points.len() || rep.contains(&0) {
        return Err(Error::Validation("one positive repetition count per network expected".into()));
    }
    let mut tasks = Vec::new();
    for (i, (p, &r)) in sigma.points.iter().zip(rep).enumerate() {
        for k in 0..r {
            for (j, m) in p.metrics.iter().enumerate() {
                tasks.push(TaskInstance::new(i, k, j, m.latency_s, m.bandwidth_bytes_per_s));
            }
        }
    }
    Ok(tasks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Rcls,
    Exact,
}

/// Schedules slowed-down tasks with bandwidth enforced. With a quantum, both
/// schedulers see durations rounded up to whole quanta.
pub fn schedule_tasks(
    tasks: &[TaskInstance],
    b_mem: f64,
    scheduler: SchedulerKind,
    quantum_s: Option<f64>,
) -> Result<CyclicSchedule> {
    match (scheduler, quantum_s) {
        (SchedulerKind::Rcls, None) => rcls(tasks, b_mem, true),
        (SchedulerKind::Rcls, Some(q)) => {
            let mut s = rcls(&quantize(tasks, q), b_mem, true)?;
            s.tasks = tasks.to_vec();
            Ok(s)
        }
        (SchedulerKind::Exact, Some(q)) => exact_schedule(tasks, b_mem, q),
        (SchedulerKind::Exact, None) => Err(Error::Config("the exact scheduler needs a time quantum".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsConfig {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_iterations: usize,
}

impl Default for PsConfig {
    fn default() -> Self {
        PsConfig { initial_step: 0.1, min_step: 1e-3, max_iterations: 200 }
    }
}

/// Derivative-free pattern search over `[SLOWDOWN_FLOOR, 1]^n`. Each
/// iteration tries `±step` along every coordinate and takes the first
/// improvement, then `±2·step`; when neither improves, the step halves.
pub fn pattern_search<F: FnMut(&[f64]) -> f64>(sl0: &[f64], mut f: F, cfg: &PsConfig) -> (Vec<f64>, f64) {
    let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut eval = |x: &[f64]| -> f64 {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        *cache.entry(key).or_insert_with(|| f(x))
    };
    let mut x: Vec<f64> = sl0.iter().map(|v| v.clamp(SLOWDOWN_FLOOR, 1.0)).collect();
    let mut fx = eval(&x);
    let mut step = cfg.initial_step;
    let mut iter = 0;
    while step >= cfg.min_step && iter < cfg.max_iterations {
        iter += 1;
        let mut moved = false;
        'stencils: for scale in [1.0, 2.0] {
            for c in 0..x.len() {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[c] = (x[c] + dir * scale * step).clamp(SLOWDOWN_FLOOR, 1.0);
                    if y[c] == x[c] {
                        continue;
                    }
                    let fy = eval(&y);
                    if fy < fx {
                        x = y;
                        fx = fy;
                        moved = true;
                        break 'stencils;
                    }
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    (x, fx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RepMode {
    /// Every network runs once per cycle.
    Uniform,
    /// Repetitions proportional to the frame-rate targets, scaled so the
    /// slowest-target network runs once and capped at `max_rep`.
    TargetRatio { max_rep: u32 },
    /// Every repetition vector in `{1..max_rep}^N` without a common factor.
    Search { max_rep: u32 },
}

impl Default for RepMode {
    fn default() -> Self {
        RepMode::Uniform
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 { a } else { gcd(b, a % b) }
}

impl RepMode {
    pub fn candidates(&self, obj: &Objective) -> Vec<Vec<u32>> {
        let n = obj.ops.len();
        match *self {
            RepMode::Uniform => vec![vec![1; n]],
            RepMode::TargetRatio { max_rep } => {
                let targets: Vec<f64> = (0..n).map(|i| obj.fps_target(i)).collect();
                let low = targets.iter().copied().fold(f64::INFINITY, f64::min);
                vec![targets.iter().map(|t| ((t / low).round() as u32).clamp(1, max_rep.max(1))).collect()]
            }
            RepMode::Search { max_rep } => {
                let choices = vec![(1..=max_rep.max(1)).collect::<Vec<u32>>(); n];
                crate::model::cartesian(&choices)
                    .into_iter()
                    .filter(|r| r.iter().copied().fold(0, gcd) == 1)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DseConfig {
    pub scheduler: SchedulerKind,
    pub quantum_s: Option<f64>,
    pub ps: PsConfig,
    pub rep: RepMode,
}

impl Default for DseConfig {
    fn default() -> Self {
        DseConfig { scheduler: SchedulerKind::Rcls, quantum_s: None, ps: PsConfig::default(), rep: RepMode::Uniform }
    }
}

/// Objective value of a joint point under slow-downs; `+inf` when the
/// schedule cannot be built.
pub fn evaluate(
    sigma: &JointDesignPoint,
    rep: &[u32],
    sl: &SlowDownVector,
    obj: &Objective,
    b_mem: f64,
    cfg: &DseConfig,
) -> f64 {
    evaluate_schedule(sigma, rep, sl, obj, b_mem, cfg).map_or(f64::INFINITY, |(v, _)| v)
}

pub fn evaluate_schedule(
    sigma: &JointDesignPoint,
    rep: &[u32],
    sl: &SlowDownVector,
    obj: &Objective,
    b_mem: f64,
    cfg: &DseConfig,
) -> Result<(f64, CyclicSchedule)> {
    let tasks = sl.apply(&build_tasks(sigma, rep)?)?;
    let schedule = schedule_tasks(&tasks, b_mem, cfg.scheduler, cfg.quantum_s)?;
    Ok((obj.score_schedule(&schedule), schedule))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnRate {
    pub fps: f64,
    pub gops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEvaluation {
    pub joint_index: usize,
    pub rep: Vec<u32>,
    /// Objective predicted with full bandwidth for every engine.
    pub predicted: f64,
    pub initial: f64,
    pub objective: f64,
    pub sl: SlowDownVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DseResult {
    pub sigma_index: usize,
    pub sigma_star: JointDesignPoint,
    pub sl_star: SlowDownVector,
    pub schedule: CyclicSchedule,
    pub objective_value: f64,
    pub per_cnn: Vec<CnnRate>,
    pub evaluations: Vec<JointEvaluation>,
}

/// Optimises slow-downs for one joint point and repetition vector.
pub fn optimise_joint(
    sigma: &JointDesignPoint,
    rep: &[u32],
    obj: &Objective,
    b_mem: f64,
    cfg: &DseConfig,
) -> Result<(SlowDownVector, f64, f64)> {
    let base = build_tasks(sigma, rep)?;
    let sl0 = propose_slowdowns(&base, b_mem)?;
    let initial = evaluate(sigma, rep, &sl0, obj, b_mem, cfg);
    let (sl, value) = pattern_search(
        &sl0.0,
        |x| evaluate(sigma, rep, &SlowDownVector(x.to_vec()), obj, b_mem, cfg),
        &cfg.ps,
    );
    Ok((SlowDownVector(sl), initial, value))
}

/// Memory-aware exploration: for every joint point, derive slow-downs from
/// the unconstrained schedule, refine them by pattern search and keep the
/// best point overall. Ties keep the earlier joint.
pub fn memory_aware_dse(joints: &[JointDesignPoint], obj: &Objective, b_mem: f64, cfg: &DseConfig) -> Result<DseResult> {
    if joints.is_empty() {
        return Err(Error::Validation("no joint design points to explore".into()));
    }
    let reps = cfg.rep.candidates(obj);
    let mut evaluations = Vec::new();
    let mut best: Option<(f64, usize, Vec<u32>, SlowDownVector)> = None;
    for (idx, sigma) in joints.iter().enumerate() {
        let predicted = obj.score(&full_bandwidth_fps(sigma));
        for rep in &reps {
            let (sl, initial, value) = optimise_joint(sigma, rep, obj, b_mem, cfg)?;
            if best.as_ref().is_none_or(|b| value < b.0) {
                best = Some((value, idx, rep.clone(), sl.clone()));
            }
            evaluations.push(JointEvaluation { joint_index: idx, rep: rep.clone(), predicted, initial, objective: value, sl });
        }
    }
    let (value, idx, rep, sl) = best.expect("at least one joint evaluated");
    if !value.is_finite() {
        return Err(Error::Infeasible("no joint design point could be scheduled".into()));
    }
    let (objective_value, schedule) = evaluate_schedule(&joints[idx], &rep, &sl, obj, b_mem, cfg)?;
    if !violations(&schedule, b_mem).is_clean() {
        return Err(Error::Internal("optimised schedule violates the bandwidth budget".into()));
    }
    let per_cnn = (0..obj.ops.len())
        .map(|i| {
            let fps = schedule.fps(i);
            CnnRate { fps, gops: obj.ops[i] as f64 * fps / 1e9 }
        })
        .collect();
    Ok(DseResult {
        sigma_index: idx,
        sigma_star: joints[idx].clone(),
        sl_star: sl,
        schedule,
        objective_value,
        per_cnn,
        evaluations,
    })
}
