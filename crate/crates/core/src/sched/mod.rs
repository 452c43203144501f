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

//! Cyclic scheduling of subgraph executions that share the memory bandwidth.
//!
//! Every engine executes its subgraphs in order, `rep` times per cycle. A
//! subgraph slowed down by `sl` runs `1/sl` times longer and draws `sl` times
//! the bandwidth, so it moves the same number of bytes.

mod exact;
mod list;

use serde::{Deserialize, Serialize};

pub use exact::{exact_schedule, EXACT_TASK_LIMIT};
pub use list::{rcls, rcls_with_preds};

use crate::util::leq_tol;
use crate::{Error, Result};

/// Smallest admissible slow-down factor.
pub const SLOWDOWN_FLOOR: f64 = 1e-3;

/// Rounds of greedy slow-down refinement in [`propose_slowdowns`].
pub const MAX_SLOWDOWN_ROUNDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskInstance {
    pub cnn: usize,
    /// Which of the network's repetitions within one cycle this belongs to.
    pub rep_index: u32,
    pub subgraph: usize,
    pub sl: f64,
    /// Duration after slow-down, seconds.
    pub latency_s: f64,
    /// Bandwidth after slow-down, bytes/s.
    pub bandwidth: f64,
    pub base_latency_s: f64,
    pub base_bandwidth: f64,
}

impl TaskInstance {
    pub fn new(cnn: usize, rep_index: u32, subgraph: usize, latency_s: f64, bandwidth: f64) -> TaskInstance {
        TaskInstance {
            cnn,
            rep_index,
            subgraph,
            sl: 1.0,
            latency_s,
            bandwidth,
            base_latency_s: latency_s,
            base_bandwidth: bandwidth,
        }
    }

    pub fn with_slowdown(&self, sl: f64) -> TaskInstance {
        TaskInstance {
            sl,
            latency_s: self.base_latency_s / sl,
            bandwidth: sl * self.base_bandwidth,
            ..self.clone()
        }
    }

    /// Position in the network's execution chain.
    fn chain_key(&self) -> (usize, u32, usize) {
        (self.cnn, self.rep_index, self.subgraph)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlowDownVector(pub Vec<f64>);

impl SlowDownVector {
    pub fn ones(n: usize) -> SlowDownVector {
        SlowDownVector(vec![1.0; n])
    }

    /// Clamps every entry into `[SLOWDOWN_FLOOR, 1]`.
    pub fn clamped(values: Vec<f64>) -> SlowDownVector {
        SlowDownVector(values.into_iter().map(|v| v.clamp(SLOWDOWN_FLOOR, 1.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, tasks: &[TaskInstance]) -> Result<Vec<TaskInstance>> {
        if tasks.len() != self.0.len() {
            return Err(Error::Schedule(format!(
                "{} slow-down factors for {} tasks",
                self.0.len(),
                tasks.len()
            )));
        }
        if let Some(bad) = self.0.iter().find(|&&s| !(SLOWDOWN_FLOOR..=1.0).contains(&s)) {
            return Err(Error::Schedule(format!("slow-down factor {bad} outside [{SLOWDOWN_FLOOR}, 1]")));
        }
        Ok(tasks.iter().zip(&self.0).map(|(t, &s)| t.with_slowdown(s)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclicSchedule {
    pub tasks: Vec<TaskInstance>,
    pub start: Vec<f64>,
    pub cycle_time_s: f64,
    /// Executions of each network per cycle.
    pub rep: Vec<u32>,
}

impl CyclicSchedule {
    pub(crate) fn from_starts(tasks: Vec<TaskInstance>, start: Vec<f64>, cycle_time_s: f64) -> CyclicSchedule {
        let n_cnn = tasks.iter().map(|t| t.cnn + 1).max().unwrap_or(0);
        let mut rep = vec![0u32; n_cnn];
        for t in &tasks {
            rep[t.cnn] = rep[t.cnn].max(t.rep_index + 1);
        }
        CyclicSchedule { tasks, start, cycle_time_s, rep }
    }

    pub fn end(&self, i: usize) -> f64 {
        self.start[i] + self.tasks[i].latency_s
    }

    /// Frames per second of network `cnn` when the cycle repeats back to back.
    pub fn fps(&self, cnn: usize) -> f64 {
        self.rep.get(cnn).copied().unwrap_or(0) as f64 / self.cycle_time_s
    }
}

/// Predecessor lists for the per-network chains, ordered by repetition and
/// subgraph index.
pub fn chain_preds(tasks: &[TaskInstance]) -> Result<Vec<Vec<usize>>> {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by_key(|&i| tasks[i].chain_key());
    let mut preds = vec![Vec::new(); tasks.len()];
    for w in order.windows(2) {
        let (a, b) = (&tasks[w[0]], &tasks[w[1]]);
        if a.chain_key() == b.chain_key() {
            return Err(Error::Schedule(format!(
                "duplicate task (cnn {}, rep {}, subgraph {})",
                a.cnn, a.rep_index, a.subgraph
            )));
        }
        if a.cnn == b.cnn {
            preds[w[1]].push(w[0]);
        }
    }
    Ok(preds)
}

/// Kahn's algorithm; fails on cyclic precedence.
pub(crate) fn topo_order(preds: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = preds.len();
    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut succs = vec![Vec::new(); n];
    for (i, ps) in preds.iter().enumerate() {
        for &p in ps {
            if p >= n {
                return Err(Error::Schedule(format!("predecessor {p} of task {i} does not exist")));
            }
            succs[p].push(i);
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = queue.pop() {
        order.push(i);
        for &s in &succs[i] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                queue.push(s);
            }
        }
    }
    if order.len() != n {
        return Err(Error::Schedule("cyclic precedence between tasks".into()));
    }
    Ok(order)
}

/// Longest path from each task to a sink, including the task itself.
pub(crate) fn tails(durations: &[f64], preds: &[Vec<usize>], order: &[usize]) -> Vec<f64> {
    let mut tail = durations.to_vec();
    for &i in order.iter().rev() {
        for &p in &preds[i] {
            tail[p] = tail[p].max(durations[p] + tail[i]);
        }
    }
    tail
}

pub(crate) fn check_bandwidth_fits(tasks: &[TaskInstance], b_mem: f64) -> Result<()> {
    match tasks.iter().find(|t| !leq_tol(t.bandwidth, b_mem)) {
        Some(t) => Err(Error::Infeasible(format!(
            "subgraph {} of cnn {} needs {:.4e} B/s alone, above the {:.4e} B/s available",
            t.subgraph, t.cnn, t.bandwidth, b_mem
        ))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvershootInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    /// Peak aggregate demand over b_mem while each task runs.
    pub overshoot: Vec<f64>,
    pub worst: Option<OvershootInterval>,
}

impl ViolationReport {
    pub fn is_violation(ratio: f64) -> bool {
        ratio > 1.0 + 1e-9
    }

    pub fn violating(&self) -> Vec<usize> {
        (0..self.overshoot.len()).filter(|&i| Self::is_violation(self.overshoot[i])).collect()
    }

    pub fn is_clean(&self) -> bool {
        self.overshoot.iter().all(|&r| !Self::is_violation(r))
    }
}

/// Sweep over start and end events (ends first at equal times), wrapping
/// executions that cross the end of the cycle into the next period.
pub fn violations(schedule: &CyclicSchedule, b_mem: f64) -> ViolationReport {
    let n = schedule.tasks.len();
    let k = schedule.cycle_time_s;
    // (time, is_start, task)
    let mut events: Vec<(f64, bool, usize)> = Vec::with_capacity(4 * n);
    for i in 0..n {
        let (s, e) = (schedule.start[i], schedule.end(i));
        if e > k && k > 0.0 {
            events.push((s, true, i));
            events.push((k, false, i));
            events.push((0.0, true, i));
            events.push(((e - k).min(k), false, i));
        } else {
            events.push((s, true, i));
            events.push((e, false, i));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let min_len = 1e-12 * k.abs().max(1e-300);
    let mut active = vec![0u32; n];
    let mut overshoot = vec![0.0f64; n];
    let mut worst: Option<OvershootInterval> = None;
    let mut idx = 0;
    while idx < events.len() {
        let t = events[idx].0;
        while idx < events.len() && events[idx].0 == t {
            let (_, is_start, i) = events[idx];
            if is_start {
                active[i] += 1;
            } else {
                active[i] -= 1;
            }
            idx += 1;
        }
        let Some(&(t_next, _, _)) = events.get(idx) else { break };
        if t_next - t <= min_len {
            continue;
        }
        let agg: f64 = (0..n).filter(|&i| active[i] > 0).map(|i| active[i] as f64 * schedule.tasks[i].bandwidth).sum();
        let ratio = agg / b_mem;
        for i in (0..n).filter(|&i| active[i] > 0) {
            overshoot[i] = overshoot[i].max(ratio);
        }
        if worst.is_none_or(|w| ratio > w.ratio) {
            worst = Some(OvershootInterval { start_s: t, end_s: t_next, ratio });
        }
    }
    ViolationReport { overshoot, worst }
}

/// Greedy slow-down step: scale each task by the inverse of its overshoot.
pub fn remove_violations(current: &SlowDownVector, report: &ViolationReport) -> SlowDownVector {
    SlowDownVector::clamped(
        current
            .0
            .iter()
            .zip(&report.overshoot)
            .map(|(&s, &o)| if ViolationReport::is_violation(o) { s * (1.0 / o).min(1.0) } else { s })
            .collect(),
    )
}

/// Initial slow-downs for a set of tasks: schedule without bandwidth limits,
/// slow down the tasks in over-subscribed intervals and repeat while the
/// unconstrained schedule still violates the budget.
pub fn propose_slowdowns(base: &[TaskInstance], b_mem: f64) -> Result<SlowDownVector> {
    let mut sl = SlowDownVector::ones(base.len());
    for _ in 0..MAX_SLOWDOWN_ROUNDS {
        let schedule = rcls(&sl.apply(base)?, b_mem, false)?;
        let report = violations(&schedule, b_mem);
        if report.is_clean() {
            break;
        }
        sl = remove_violations(&sl, &report);
    }
    Ok(sl)
}

/// Rounds every duration up to a whole number of quanta.
pub fn quantize(tasks: &[TaskInstance], quantum_s: f64) -> Vec<TaskInstance> {
    tasks
        .iter()
        .map(|t| TaskInstance { latency_s: quanta(t.latency_s, quantum_s) as f64 * quantum_s, ..t.clone() })
        .collect()
}

pub(crate) fn quanta(duration_s: f64, quantum_s: f64) -> u64 {
    ((duration_s / quantum_s) * (1.0 - 1e-12)).ceil().max(1.0) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sched(tasks: Vec<TaskInstance>, start: Vec<f64>, k: f64) -> CyclicSchedule {
        CyclicSchedule::from_starts(tasks, start, k)
    }

    #[test]
    fn disjoint_tasks_are_clean() {
        let t = vec![TaskInstance::new(0, 0, 0, 1.0, 0.9), TaskInstance::new(1, 0, 0, 1.0, 1.0)];
        let r = violations(&sched(t, vec![0.0, 1.0], 2.0), 1.0);
        assert!(r.is_clean());
        assert!(r.violating().is_empty());
    }

    #[test]
    fn three_concurrent_overshoot() {
        let t = vec![
            TaskInstance::new(0, 0, 0, 1.0, 0.5),
            TaskInstance::new(1, 0, 0, 1.0, 0.4),
            TaskInstance::new(2, 0, 0, 1.0, 0.35),
        ];
        let r = violations(&sched(t, vec![0.0; 3], 1.0), 1.0);
        for &o in &r.overshoot {
            assert!((o - 1.25).abs() < 1e-12);
        }
        let sl = remove_violations(&SlowDownVector::ones(3), &r);
        for &s in &sl.0 {
            assert!((s - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn half_overlap_uses_overlap_only() {
        // a: [0, 2) at 0.6; b: [1, 3) at 0.7; c: [2.5, 3.5) at 0.2
        let t = vec![
            TaskInstance::new(0, 0, 0, 2.0, 0.6),
            TaskInstance::new(1, 0, 0, 2.0, 0.7),
            TaskInstance::new(2, 0, 0, 1.0, 0.2),
        ];
        let r = violations(&sched(t, vec![0.0, 1.0, 2.5], 4.0), 1.0);
        assert!((r.overshoot[0] - 1.3).abs() < 1e-12);
        assert!((r.overshoot[1] - 1.3).abs() < 1e-12);
        assert!((r.overshoot[2] - 0.9).abs() < 1e-12);
        let w = r.worst.unwrap();
        assert_eq!((w.start_s, w.end_s), (1.0, 2.0));
    }

    #[test]
    fn wrapping_execution_counts_at_cycle_start() {
        let t = vec![TaskInstance::new(0, 0, 0, 2.0, 0.6), TaskInstance::new(1, 0, 0, 1.0, 0.6)];
        // task 0 runs [2, 4) in a 3 s cycle, so it also occupies [0, 1)
        let r = violations(&sched(t, vec![2.0, 0.0], 3.0), 1.0);
        assert!((r.overshoot[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn no_violation_keeps_unit_slowdown() {
        let r = ViolationReport { overshoot: vec![0.5, 1.0], worst: None };
        assert_eq!(remove_violations(&SlowDownVector::ones(2), &r).0, vec![1.0, 1.0]);
    }

    #[test]
    fn extreme_overshoot_hits_floor() {
        let r = ViolationReport { overshoot: vec![2000.0], worst: None };
        assert_eq!(remove_violations(&SlowDownVector::ones(1), &r).0, vec![SLOWDOWN_FLOOR]);
    }

    #[test]
    fn duplicate_tasks_rejected() {
        let t = vec![TaskInstance::new(0, 0, 0, 1.0, 0.1), TaskInstance::new(0, 0, 0, 1.0, 0.1)];
        assert!(chain_preds(&t).is_err());
    }

    #[test]
    fn proposed_slowdowns_clear_asap_schedule() {
        let t = vec![
            TaskInstance::new(0, 0, 0, 1.0, 0.5),
            TaskInstance::new(1, 0, 0, 1.0, 0.4),
            TaskInstance::new(2, 0, 0, 0.8, 0.35),
            TaskInstance::new(2, 0, 1, 1.0, 0.6),
        ];
        let sl = propose_slowdowns(&t, 1.0).unwrap();
        let s = rcls(&sl.apply(&t).unwrap(), 1.0, false).unwrap();
        assert!(violations(&s, 1.0).is_clean());
    }

    proptest! {
        #[test]
        fn slowdown_preserves_bytes(l in 1e-9f64..1e3, b in 1.0f64..1e12, sl in SLOWDOWN_FLOOR..=1.0f64) {
            let t = TaskInstance::new(0, 0, 0, l, b).with_slowdown(sl);
            let rel = (t.latency_s * t.bandwidth - l * b).abs() / (l * b);
            prop_assert!(rel <= 1e-12);
        }

        #[test]
        fn violation_report_matches_pointwise_probe(
            raw in prop::collection::vec((0u32..10, 1u32..5, 1u32..10), 1..8),
        ) {
            let tasks: Vec<_> = raw.iter().enumerate().map(|(i, &(_, d, b))| TaskInstance::new(i, 0, 0, d as f64, b as f64 / 10.0)).collect();
            let start: Vec<f64> = raw.iter().map(|&(s, _, _)| s as f64).collect();
            let k = raw.iter().map(|&(s, d, _)| (s + d) as f64).fold(0.0, f64::max);
            let s = CyclicSchedule::from_starts(tasks, start, k);
            let r = violations(&s, 1.0);
            // probe the midpoint of every unit interval
            for i in 0..raw.len() {
                let mut peak: f64 = 0.0;
                for u in 0..k as u32 {
                    let x = u as f64 + 0.5;
                    if s.start[i] <= x && x < s.end(i) {
                        let agg: f64 = (0..raw.len()).filter(|&j| s.start[j] <= x && x < s.end(j)).map(|j| s.tasks[j].bandwidth).sum();
                        peak = peak.max(agg);
                    }
                }
                prop_assert!((r.overshoot[i] - peak).abs() < 1e-9);
            }
        }
    }
}
