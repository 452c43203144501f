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

//! Exact minimum-makespan scheduling on a discretised timeline.
//!
//! Depth-first branch-and-bound over a serial schedule-generation scheme.
//! Tasks are placed in non-decreasing (start, index) order and each start is
//! either the earliest precedence-feasible time or the finish time of an
//! already placed task. Every schedule that cannot shift a task left has such
//! a placement order, so the search stays complete.

use super::{chain_preds, check_bandwidth_fits, list::rcls, quanta, quantize, tails, topo_order, CyclicSchedule, TaskInstance};
use crate::util::leq_tol;
use crate::{Error, Result};

/// Largest instance accepted by [`exact_schedule`].
pub const EXACT_TASK_LIMIT: usize = 24;

struct Search<'a> {
    dur: Vec<u64>,
    bw: Vec<f64>,
    b_mem: f64,
    preds: &'a [Vec<usize>],
    order: Vec<usize>,
    tail: Vec<u64>,
    start: Vec<Option<u64>>,
    profile: Vec<f64>,
    best: u64,
    best_start: Vec<u64>,
}

impl Search<'_> {
    fn fits(&self, t: u64, d: u64, b: f64) -> bool {
        (t..t + d).all(|u| leq_tol(self.profile[u as usize] + b, self.b_mem))
    }

    fn place(&mut self, i: usize, t: u64, sign: f64) {
        for u in t..t + self.dur[i] {
            self.profile[u as usize] += sign * self.bw[i];
        }
        self.start[i] = if sign > 0.0 { Some(t) } else { None };
    }

    fn finish(&self, i: usize) -> Option<u64> {
        self.start[i].map(|s| s + self.dur[i])
    }

    fn lower_bound(&self, last_start: u64) -> u64 {
        let mut lb = (0..self.dur.len()).filter_map(|i| self.finish(i)).max().unwrap_or(0);
        let mut est = vec![0u64; self.dur.len()];
        let mut energy = 0.0;
        for &i in &self.order {
            if self.start[i].is_some() {
                continue;
            }
            est[i] = last_start;
            for &p in &self.preds[i] {
                let ready = self.finish(p).unwrap_or(est[p] + self.dur[p]);
                est[i] = est[i].max(ready);
            }
            lb = lb.max(est[i] + self.tail[i]);
            energy += self.dur[i] as f64 * self.bw[i];
        }
        if energy > 0.0 {
            let need = energy * (1.0 - 1e-9);
            let mut cap = 0.0;
            let mut u = last_start;
            while cap < need {
                let used = self.profile.get(u as usize).copied().unwrap_or(0.0);
                cap += (self.b_mem - used).max(0.0);
                u += 1;
            }
            lb = lb.max(u);
        }
        lb
    }

    fn dfs(&mut self, placed: usize, last: (u64, usize)) {
        let n = self.dur.len();
        if placed == n {
            let makespan = (0..n).filter_map(|i| self.finish(i)).max().unwrap_or(0);
            if makespan < self.best {
                self.best = makespan;
                self.best_start = self.start.iter().map(|s| s.unwrap_or(0)).collect();
            }
            return;
        }
        if self.lower_bound(last.0) >= self.best {
            return;
        }
        let mut candidates: Vec<u64> = (0..n).filter_map(|i| self.finish(i)).filter(|&f| f >= last.0).collect();
        candidates.push(last.0);
        candidates.sort_unstable();
        candidates.dedup();

        let mut eligible: Vec<usize> = (0..n)
            .filter(|&i| self.start[i].is_none() && self.preds[i].iter().all(|&p| self.start[p].is_some()))
            .collect();
        eligible.sort_by(|&a, &b| self.tail[b].cmp(&self.tail[a]).then(a.cmp(&b)));
        for i in eligible {
            let lo = self.preds[i].iter().filter_map(|&p| self.finish(p)).max().unwrap_or(0).max(last.0);
            let starts = std::iter::once(lo).chain(candidates.iter().copied().filter(|&t| t > lo));
            for t in starts {
                if (t, i) < last || t + self.dur[i] >= self.best {
                    continue;
                }
                if !self.fits(t, self.dur[i], self.bw[i]) {
                    continue;
                }
                self.place(i, t, 1.0);
                self.dfs(placed + 1, (t, i));
                self.place(i, t, -1.0);
            }
        }
    }
}

/// Minimum cycle time over schedules whose starts are multiples of
/// `quantum_s`, with each duration rounded up to whole quanta. The returned
/// schedule keeps the original durations, so its real executions lie inside
/// the quantised ones.
pub fn exact_schedule(tasks: &[TaskInstance], b_mem: f64, quantum_s: f64) -> Result<CyclicSchedule> {
    let n = tasks.len();
    if n == 0 {
        return Err(Error::Schedule("nothing to schedule".into()));
    }
    if n > EXACT_TASK_LIMIT {
        return Err(Error::Schedule(format!(
            "instance too large for exact solver: {n} tasks, limit {EXACT_TASK_LIMIT}"
        )));
    }
    if !(quantum_s > 0.0 && quantum_s.is_finite()) {
        return Err(Error::Validation(format!("time quantum must be positive, got {quantum_s}")));
    }
    check_bandwidth_fits(tasks, b_mem)?;
    let preds = chain_preds(tasks)?;
    let order = topo_order(&preds)?;
    let dur: Vec<u64> = tasks.iter().map(|t| quanta(t.latency_s, quantum_s)).collect();
    let tail_f = tails(&dur.iter().map(|&d| d as f64).collect::<Vec<_>>(), &preds, &order);

    let incumbent = rcls(&quantize(tasks, quantum_s), b_mem, true)?;
    let inc_start: Vec<u64> = incumbent.start.iter().map(|&s| (s / quantum_s).round() as u64).collect();
    let inc_makespan = (0..n).map(|i| inc_start[i] + dur[i]).max().unwrap_or(0);

    let mut search = Search {
        bw: tasks.iter().map(|t| t.bandwidth).collect(),
        b_mem,
        preds: &preds,
        order,
        tail: tail_f.iter().map(|&t| t.round() as u64).collect(),
        start: vec![None; n],
        profile: vec![0.0; inc_makespan as usize + 1],
        best: inc_makespan,
        best_start: inc_start,
        dur,
    };
    search.dfs(0, (0, 0));
    let start = search.best_start.iter().map(|&s| s as f64 * quantum_s).collect();
    Ok(CyclicSchedule::from_starts(tasks.to_vec(), start, search.best as f64 * quantum_s))
}
