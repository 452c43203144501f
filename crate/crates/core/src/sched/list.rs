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

//! Resource-constrained list scheduling.

use super::{chain_preds, check_bandwidth_fits, tails, topo_order, CyclicSchedule, TaskInstance};
use crate::util::leq_tol;
use crate::{Error, Result};

/// List schedule over the per-network chains. See [`rcls_with_preds`].
pub fn rcls(tasks: &[TaskInstance], b_mem: f64, enforce_bandwidth: bool) -> Result<CyclicSchedule> {
    let preds = chain_preds(tasks)?;
    rcls_with_preds(tasks, &preds, b_mem, enforce_bandwidth)
}

/// At each event time, starts ready tasks in priority order (longest
/// remaining chain, then cnn, repetition and subgraph index) while their
/// bandwidth fits the residual budget. Without enforcement every task starts
/// as soon as its predecessors finish. The cycle time is the makespan.
pub fn rcls_with_preds(
    tasks: &[TaskInstance],
    preds: &[Vec<usize>],
    b_mem: f64,
    enforce_bandwidth: bool,
) -> Result<CyclicSchedule> {
    let n = tasks.len();
    if n == 0 {
        return Err(Error::Schedule("nothing to schedule".into()));
    }
    if preds.len() != n {
        return Err(Error::Schedule("predecessor list does not match tasks".into()));
    }
    let order = topo_order(preds)?;
    if enforce_bandwidth {
        check_bandwidth_fits(tasks, b_mem)?;
    }
    let durations: Vec<f64> = tasks.iter().map(|t| t.latency_s).collect();
    let tail = tails(&durations, preds, &order);
    let mut priority: Vec<usize> = (0..n).collect();
    priority.sort_by(|&a, &b| {
        tail[b]
            .total_cmp(&tail[a])
            .then(tasks[a].chain_key().cmp(&tasks[b].chain_key()))
            .then(a.cmp(&b))
    });

    let mut start: Vec<Option<f64>> = vec![None; n];
    let mut finish: Vec<f64> = vec![f64::INFINITY; n];
    let mut running: Vec<usize> = Vec::new();
    let mut remaining = n;
    let mut t = 0.0f64;
    while remaining > 0 {
        running.retain(|&i| finish[i] > t);
        let mut used: f64 = running.iter().map(|&i| tasks[i].bandwidth).sum();
        for &i in &priority {
            if start[i].is_some() || !preds[i].iter().all(|&p| finish[p] <= t) {
                continue;
            }
            if enforce_bandwidth && !leq_tol(used + tasks[i].bandwidth, b_mem) {
                continue;
            }
            start[i] = Some(t);
            finish[i] = t + tasks[i].latency_s;
            used += tasks[i].bandwidth;
            running.push(i);
            remaining -= 1;
        }
        if remaining == 0 {
            break;
        }
        t = running
            .iter()
            .map(|&i| finish[i])
            .filter(|&f| f > t)
            .fold(f64::INFINITY, f64::min);
        if !t.is_finite() {
            return Err(Error::Internal("list scheduler stalled with no running task".into()));
        }
    }
    let start: Vec<f64> = start.into_iter().map(|s| s.unwrap_or(0.0)).collect();
    let k = (0..n).map(|i| finish[i]).fold(0.0, f64::max);
    Ok(CyclicSchedule::from_starts(tasks.to_vec(), start, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::violations;

    #[test]
    fn single_task() {
        let s = rcls(&[TaskInstance::new(0, 0, 0, 5.0, 1.0)], 10.0, true).unwrap();
        assert_eq!(s.start, vec![0.0]);
        assert_eq!(s.cycle_time_s, 5.0);
    }

    #[test]
    fn bandwidth_serialises_independent_tasks() {
        let t = vec![TaskInstance::new(0, 0, 0, 1.0, 0.6), TaskInstance::new(1, 0, 0, 1.0, 0.6)];
        let s = rcls(&t, 1.0, true).unwrap();
        assert_eq!(s.start, vec![0.0, 1.0]);
        assert_eq!(s.cycle_time_s, 2.0);
        let free = rcls(&t, 1.0, false).unwrap();
        assert_eq!(free.start, vec![0.0, 0.0]);
        assert!(!violations(&free, 1.0).is_clean());
    }

    #[test]
    fn chain_runs_back_to_back() {
        let t = vec![
            TaskInstance::new(0, 0, 2, 3.0, 0.1),
            TaskInstance::new(0, 0, 0, 1.0, 0.1),
            TaskInstance::new(0, 0, 1, 2.0, 0.1),
        ];
        let s = rcls(&t, 1.0, true).unwrap();
        assert_eq!(s.start, vec![3.0, 0.0, 1.0]);
        assert_eq!(s.cycle_time_s, 6.0);
    }

    #[test]
    fn longest_chain_goes_first() {
        // cnn 1 has the longer remaining chain, so it wins the single slot
        let t = vec![
            TaskInstance::new(0, 0, 0, 1.0, 0.6),
            TaskInstance::new(1, 0, 0, 1.0, 0.6),
            TaskInstance::new(1, 0, 1, 4.0, 0.1),
        ];
        let s = rcls(&t, 1.0, true).unwrap();
        assert_eq!(s.start[1], 0.0);
        assert_eq!(s.start[0], 1.0);
    }

    #[test]
    fn oversized_task_is_infeasible() {
        let err = rcls(&[TaskInstance::new(0, 0, 0, 1.0, 2.0)], 1.0, true).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
        assert!(rcls(&[TaskInstance::new(0, 0, 0, 1.0, 2.0)], 1.0, false).is_ok());
    }

    #[test]
    fn cyclic_precedence_is_error() {
        let t = vec![TaskInstance::new(0, 0, 0, 1.0, 0.1), TaskInstance::new(1, 0, 0, 1.0, 0.1)];
        let err = rcls_with_preds(&t, &[vec![1], vec![0]], 1.0, true).unwrap_err();
        assert!(err.to_string().contains("cyclic"));
    }

    #[test]
    fn deterministic() {
        let t: Vec<_> = (0..6).map(|i| TaskInstance::new(i % 2, 0, i / 2, 1.0 + i as f64 * 0.3, 0.45)).collect();
        assert_eq!(rcls(&t, 1.0, true).unwrap(), rcls(&t, 1.0, true).unwrap());
    }
}
