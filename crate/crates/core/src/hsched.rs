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

//! Static configuration of the memory arbiter: how many consecutive burst
//! slots each subgraph gets per round-robin turn and how many rounds it needs.
//!
//! The arbiter serves the engines that currently want data in turn, each for
//! its `slots` consecutive bursts, so a subgraph running alongside others
//! whose slots sum to `slots_total` receives `slots / slots_total` of the
//! memory bandwidth.

use serde::{Deserialize, Serialize};

use crate::model::PlatformSpec;
use crate::pareto::JointDesignPoint;
use crate::sched::{violations, CyclicSchedule};
use crate::{Error, Result};

pub const DEFAULT_MAX_SLOTS_TOTAL: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAllocation {
    pub slots: Vec<u32>,
    pub slots_total: u32,
    pub fractions: Vec<f64>,
    /// Largest `|fraction - required / b_mem|` over the entries.
    pub max_error: f64,
}

/// Smallest achievable max error for a fixed round length, and the slots
/// that achieve it. Each entry gets at least one slot.
fn apportion(targets: &[f64], total: u32) -> Option<(f64, Vec<u32>)> {
    let n = targets.len() as u32;
    if total < n {
        return None;
    }
    let t = total as f64;
    let ideal: Vec<f64> = targets.iter().map(|&x| x * t).collect();
    let feasible = |delta: f64| -> Option<(Vec<u32>, Vec<u32>)> {
        let eps = 1e-9;
        let mut lo = Vec::with_capacity(ideal.len());
        let mut hi = Vec::with_capacity(ideal.len());
        for &x in &ideal {
            let l = ((x - delta - eps).ceil().max(1.0)) as u32;
            let h = (x + delta + eps).floor().min(t) as i64;
            if (h as f64) < l as f64 {
                return None;
            }
            lo.push(l);
            hi.push(h as u32);
        }
        let (sl, sh): (u32, u32) = (lo.iter().sum(), hi.iter().sum());
        (sl <= total && total <= sh).then_some((lo, hi))
    };
    let mut deltas: Vec<f64> = ideal
        .iter()
        .flat_map(|&x| (1..=total).map(move |k| (k as f64 - x).abs()))
        .collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    for delta in deltas {
        if let Some((lo, hi)) = feasible(delta) {
            let mut slots = lo;
            let mut spare = total - slots.iter().sum::<u32>();
            while spare > 0 {
                // top up whichever entry is furthest below its ideal share
                let pick = (0..slots.len())
                    .filter(|&e| slots[e] < hi[e])
                    .max_by(|&a, &b| (ideal[a] - slots[a] as f64).total_cmp(&(ideal[b] - slots[b] as f64)).then(b.cmp(&a)))
                    .expect("feasible bounds leave room");
                slots[pick] += 1;
                spare -= 1;
            }
            let err = slots.iter().zip(targets).map(|(&s, &x)| (s as f64 / t - x).abs()).fold(0.0, f64::max);
            return Some((err, slots));
        }
    }
    None
}

/// Integer slot counts whose fractions best match `required / b_mem` in the
/// max-error sense, searching every round length up to `max_slots_total`.
/// Ties go to the shorter round.
pub fn compute_slots(required_bw: &[f64], b_mem: f64, max_slots_total: u32) -> Result<SlotAllocation> {
    if required_bw.is_empty() {
        return Err(Error::Validation("no entries to allocate slots for".into()));
    }
    if (max_slots_total as usize) < required_bw.len() {
        return Err(Error::Config(format!(
            "{} entries cannot share at most {max_slots_total} slots",
            required_bw.len()
        )));
    }
    let targets: Vec<f64> = required_bw.iter().map(|&b| b / b_mem).collect();
    let mut best: Option<(f64, u32, Vec<u32>)> = None;
    for total in required_bw.len() as u32..=max_slots_total {
        if let Some((err, slots)) = apportion(&targets, total) {
            if best.as_ref().is_none_or(|b| err < b.0 - 1e-12) {
                best = Some((err, total, slots));
            }
        }
    }
    let (max_error, slots_total, slots) = best.ok_or_else(|| Error::Internal("no slot apportionment found".into()))?;
    let fractions = slots.iter().map(|&s| s as f64 / slots_total as f64).collect();
    Ok(SlotAllocation { slots, slots_total, fractions, max_error })
}

/// Rounds of `slots` consecutive bursts needed to move `data_elements`.
pub fn executions(data_elements: u64, slots: u32, burst_length: u32, pack_factor: u32) -> u64 {
    let per_round = slots as u64 * burst_length as u64 * pack_factor as u64;
    data_elements.div_ceil(per_round)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsEntry {
    pub cnn: usize,
    pub rep_index: u32,
    pub subgraph: usize,
    pub data_elements: u64,
    pub slots: u32,
    /// Byte offset in a flat address space.
    pub base_address: u64,
    pub executions: u64,
    /// Busiest set of concurrent executions this entry belongs to.
    pub group: usize,
    /// Slot sum of that set.
    pub slots_total: u32,
    /// Share of the port guaranteed while the entry runs.
    pub fraction: f64,
    pub bandwidth: f64,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsConfigTable {
    pub entries: Vec<HsEntry>,
    pub burst_length: u32,
    pub pack_factor: u32,
    pub cycle_time_s: f64,
    pub rep: Vec<u32>,
}

impl HsConfigTable {
    pub fn entry(&self, cnn: usize, rep_index: u32, subgraph: usize) -> Option<&HsEntry> {
        self.entries
            .iter()
            .find(|e| e.cnn == cnn && e.rep_index == rep_index && e.subgraph == subgraph)
    }

    /// Elements delivered per round to each entry.
    pub fn per_round(&self, e: &HsEntry) -> u64 {
        e.slots as u64 * self.burst_length as u64 * self.pack_factor as u64
    }
}

/// Sets of executions running at the same time, one per elementary interval
/// of the cycle; executions crossing the cycle end wrap to its start.
fn concurrency_sets(schedule: &CyclicSchedule) -> Vec<Vec<usize>> {
    let k = schedule.cycle_time_s;
    let mut spans: Vec<(f64, f64, usize)> = Vec::new();
    for i in 0..schedule.tasks.len() {
        let (s, e) = (schedule.start[i], schedule.end(i));
        if k > 0.0 && e > k {
            spans.push((s, k, i));
            spans.push((0.0, (e - k).min(k), i));
        } else {
            spans.push((s, e, i));
        }
    }
    let mut cuts: Vec<f64> = spans.iter().flat_map(|&(s, e, _)| [s, e]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let mut active: Vec<usize> = spans.iter().filter(|&&(s, e, _)| s <= mid && mid < e).map(|x| x.2).collect();
        active.sort_unstable();
        active.dedup();
        if !active.is_empty() && sets.last() != Some(&active) {
            sets.push(active);
        }
    }
    sets.sort();
    sets.dedup();
    sets
}

/// Slot counts on a common round length `T`, with `slots / T` as close as
/// possible to `targets` in the max-error sense. Rounds in which no set of
/// concurrent executions holds more than `T` slots are preferred: there every
/// execution gets at least `slots / T` of the port. Ties go to the shorter
/// round.
fn scaled_slots(targets: &[f64], sets: &[Vec<usize>], max_total: u32) -> (Vec<u32>, u32) {
    let mut best: Option<((bool, f64), u32, Vec<u32>)> = None;
    for total in 1..=max_total {
        let t = total as f64;
        let slots: Vec<u32> = targets.iter().map(|&x| ((x * t).round() as u32).max(1)).collect();
        let err = slots.iter().zip(targets).map(|(&s, &x)| (s as f64 / t - x).abs()).fold(0.0, f64::max);
        let over = sets.iter().any(|set| set.iter().map(|&i| slots[i]).sum::<u32>() > total);
        let key = (over, err);
        if best.as_ref().is_none_or(|b| key.0 < b.0 .0 || (key.0 == b.0 .0 && key.1 < b.0 .1 - 1e-12)) {
            best = Some((key, total, slots));
        }
    }
    let (_, total, slots) = best.expect("max_total is at least 1");
    (slots, total)
}

/// One entry per scheduled execution. Slots are sized on a round length shared
/// by the whole cycle; each entry reports the busiest set of executions it
/// runs alongside (`group`), that set's slot sum and its guaranteed share.
pub fn build_config_table(
    schedule: &CyclicSchedule,
    sigma: &JointDesignPoint,
    platform: &PlatformSpec,
    max_slots_total: u32,
) -> Result<HsConfigTable> {
    if max_slots_total == 0 {
        return Err(Error::Config("the arbiter round needs at least one slot".into()));
    }
    if !violations(schedule, platform.b_mem).is_clean() {
        return Err(Error::Internal("schedule exceeds the memory bandwidth in some interval".into()));
    }
    let n = schedule.tasks.len();
    let data: Vec<u64> = schedule
        .tasks
        .iter()
        .map(|t| {
            sigma
                .points
                .get(t.cnn)
                .and_then(|p| p.metrics.get(t.subgraph))
                .map(|m| m.total_elements())
                .ok_or_else(|| {
                    Error::Validation(format!("schedule task (cnn {}, subgraph {}) is not in the design point", t.cnn, t.subgraph))
                })
        })
        .collect::<Result<_>>()?;

    // addresses: one region per distinct (cnn, subgraph), laid out in order
    let mut base = std::collections::BTreeMap::new();
    for (t, &d) in schedule.tasks.iter().zip(&data) {
        base.entry((t.cnn, t.subgraph)).or_insert(d);
    }
    let mut offset = 0u64;
    for size in base.values_mut() {
        let here = offset;
        offset += (*size as f64 * platform.bytes_per_element()).ceil() as u64;
        *size = here;
    }

    let sets = concurrency_sets(schedule);
    let targets: Vec<f64> = schedule.tasks.iter().map(|t| t.bandwidth / platform.b_mem).collect();
    let (slots, _) = scaled_slots(&targets, &sets, max_slots_total);
    let mut group = vec![0usize; n];
    let mut totals = vec![0u32; n];
    for (g, set) in sets.iter().enumerate() {
        let sum: u32 = set.iter().map(|&i| slots[i]).sum();
        for &i in set {
            if sum > totals[i] {
                totals[i] = sum;
                group[i] = g;
            }
        }
    }
    let fractions: Vec<f64> = (0..n).map(|i| slots[i] as f64 / totals[i].max(slots[i]) as f64).collect();
    for i in 0..n {
        totals[i] = totals[i].max(slots[i]);
    }

    let pack = platform.pack_factor();
    let entries = (0..n)
        .map(|i| {
            let t = &schedule.tasks[i];
            HsEntry {
                cnn: t.cnn,
                rep_index: t.rep_index,
                subgraph: t.subgraph,
                data_elements: data[i],
                slots: slots[i],
                base_address: base[&(t.cnn, t.subgraph)],
                executions: executions(data[i], slots[i], platform.burst_length, pack),
                group: group[i],
                slots_total: totals[i],
                fraction: fractions[i],
                bandwidth: t.bandwidth,
                start_s: schedule.start[i],
                end_s: schedule.end(i),
            }
        })
        .collect();
    Ok(HsConfigTable {
        entries,
        burst_length: platform.burst_length,
        pack_factor: pack,
        cycle_time_s: schedule.cycle_time_s,
        rep: schedule.rep.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::tests::joint;
    use crate::sched::{rcls, TaskInstance};
    use crate::sdf::tests::platform;
    use proptest::prelude::*;

    /// Tries every slot vector for every round length.
    fn brute(targets: &[f64], max_total: u32) -> f64 {
        fn rec(i: usize, left: u32, total: u32, targets: &[f64], cur: f64, best: &mut f64) {
            if i == targets.len() {
                if left == 0 {
                    *best = best.min(cur);
                }
                return;
            }
            for s in 1..=left {
                let e = (s as f64 / total as f64 - targets[i]).abs();
                rec(i + 1, left - s, total, targets, cur.max(e), best);
            }
        }
        let mut best = f64::INFINITY;
        for total in targets.len() as u32..=max_total {
            rec(0, total, total, targets, 0.0, &mut best);
        }
        best
    }

    #[test]
    fn one_two_four() {
        let a = compute_slots(&[1.0, 2.0, 4.0], 7.0, DEFAULT_MAX_SLOTS_TOTAL).unwrap();
        assert_eq!(a.slots, vec![1, 2, 4]);
        assert_eq!(a.slots_total, 7);
        let pct: Vec<f64> = a.fractions.iter().map(|f| (f * 10000.0).round() / 100.0).collect();
        assert_eq!(pct, vec![14.29, 28.57, 57.14]);
    }

    #[test]
    fn single_entry_gets_everything() {
        let a = compute_slots(&[0.3], 1.0, DEFAULT_MAX_SLOTS_TOTAL).unwrap();
        assert_eq!((a.slots.clone(), a.slots_total), (vec![1], 1));
        assert_eq!(a.fractions, vec![1.0]);
    }

    #[test]
    fn equal_halves() {
        let a = compute_slots(&[0.5, 0.5], 1.0, DEFAULT_MAX_SLOTS_TOTAL).unwrap();
        assert_eq!((a.slots.clone(), a.slots_total, a.max_error), (vec![1, 1], 2, 0.0));
    }

    #[test]
    fn too_many_entries() {
        assert!(compute_slots(&[0.1; 5], 1.0, 4).is_err());
    }

    #[test]
    fn worked_example_executions() {
        let data = [16384u64, 16384, 32768];
        let slots = [1u32, 2, 4];
        let per_round: Vec<u64> = slots.iter().map(|&s| s as u64 * 1024 * 4).collect();
        assert_eq!(per_round, vec![4096, 8192, 16384]);
        let ex: Vec<u64> = data.iter().zip(&slots).map(|(&d, &s)| executions(d, s, 1024, 4)).collect();
        assert_eq!(ex, vec![4, 2, 2]);
        assert_eq!(executions(4096, 1, 1024, 4), 1);
        // 10000 elements at 4096 per round: two full rounds and a partial one
        assert_eq!(executions(10000, 1, 1024, 4), 3);
    }

    #[test]
    fn table_groups_and_addresses() {
        let mut sigma = joint(&[vec![(1.0, 0.4), (1.0, 0.2)], vec![(1.0, 0.6)]]);
        for m in sigma.points.iter_mut().flat_map(|p| p.metrics.iter_mut()) {
            m.io_elements = 1000;
        }
        let p = platform().with_b_mem(1.0);
        let tasks = vec![
            TaskInstance::new(0, 0, 0, 1.0, 0.4),
            TaskInstance::new(0, 0, 1, 1.0, 0.2),
            TaskInstance::new(1, 0, 0, 1.0, 0.6),
        ];
        let s = rcls(&tasks, 1.0, true).unwrap();
        let t = build_config_table(&s, &sigma, &p, DEFAULT_MAX_SLOTS_TOTAL).unwrap();
        assert_eq!(t.entries.len(), 3);
        // the 0.6 task overlaps the first subgraph of cnn 0; the second runs alone
        let e = |c, j| t.entry(c, 0, j).unwrap();
        assert_eq!(e(0, 0).group, e(1, 0).group);
        assert_ne!(e(0, 0).group, e(0, 1).group);
        assert_eq!((e(0, 0).slots, e(1, 0).slots, e(0, 0).slots_total), (2, 3, 5));
        assert_eq!(e(0, 1).fraction, 1.0);
        assert_eq!(e(0, 0).base_address, 0);
        assert_eq!((e(0, 1).base_address, e(1, 0).base_address), (2000, 4000));
        assert_eq!(e(0, 0).executions, 1);
    }

    #[test]
    fn chained_overlaps_keep_their_share() {
        // one long execution of cnn 1 runs beside three short ones of cnn 0;
        // every pair is within budget but all four together are not
        let sigma = joint(&[vec![(1.0, 0.3), (1.0, 0.3), (1.0, 0.3)], vec![(3.0, 0.6)]]);
        let p = platform().with_b_mem(1.0);
        let tasks = vec![
            TaskInstance::new(0, 0, 0, 1.0, 0.3),
            TaskInstance::new(0, 0, 1, 1.0, 0.3),
            TaskInstance::new(0, 0, 2, 1.0, 0.3),
            TaskInstance::new(1, 0, 0, 3.0, 0.6),
        ];
        let s = rcls(&tasks, 1.0, true).unwrap();
        let t = build_config_table(&s, &sigma, &p, DEFAULT_MAX_SLOTS_TOTAL).unwrap();
        for e in &t.entries {
            assert!(e.fraction >= e.bandwidth - 1.0 / e.slots_total as f64, "{e:?}");
        }
        let e = |c, j| t.entry(c, 0, j).unwrap();
        // exact at a round of 10: 3 + 6 slots in use, one to spare
        assert_eq!((e(0, 1).slots, e(1, 0).slots, e(1, 0).slots_total), (3, 6, 9));
    }

    #[test]
    fn wrapped_execution_joins_the_start_of_the_cycle() {
        let s = CyclicSchedule::from_starts(
            vec![TaskInstance::new(0, 0, 0, 2.0, 0.5), TaskInstance::new(1, 0, 0, 1.0, 0.5)],
            vec![1.0, 0.0],
            2.0,
        );
        let sets = concurrency_sets(&s);
        // [0, 1) holds the wrapped tail of task 0 and task 1; [1, 2) only task 0
        assert_eq!(sets, vec![vec![0], vec![0, 1]]);
    }

    #[test]
    fn overloaded_schedule_is_rejected() {
        let sigma = joint(&[vec![(1.0, 0.6)], vec![(1.0, 0.6)]]);
        let tasks = vec![TaskInstance::new(0, 0, 0, 1.0, 0.6), TaskInstance::new(1, 0, 0, 1.0, 0.6)];
        let s = rcls(&tasks, 1.0, false).unwrap();
        let err = build_config_table(&s, &sigma, &platform().with_b_mem(1.0), 64).unwrap_err();
        assert!(matches!(err, Error::Internal(_)));
    }

    proptest! {
        #[test]
        fn minimax_matches_brute_force(raw in prop::collection::vec(1u32..20, 1..4)) {
            let sum: u32 = raw.iter().sum();
            let b_mem = sum as f64 * 1.25;
            let bw: Vec<f64> = raw.iter().map(|&r| r as f64).collect();
            let a = compute_slots(&bw, b_mem, 12).unwrap();
            let targets: Vec<f64> = bw.iter().map(|b| b / b_mem).collect();
            prop_assert!((a.max_error - brute(&targets, 12)).abs() < 1e-12);
            prop_assert_eq!(a.slots.iter().sum::<u32>(), a.slots_total);
            let fsum: f64 = a.fractions.iter().sum();
            prop_assert!((fsum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fractions_within_one_step(raw in prop::collection::vec(1u32..50, 1..6)) {
            let sum: u32 = raw.iter().sum();
            let bw: Vec<f64> = raw.iter().map(|&r| r as f64).collect();
            let a = compute_slots(&bw, sum as f64, DEFAULT_MAX_SLOTS_TOTAL).unwrap();
            for (f, b) in a.fractions.iter().zip(&bw) {
                prop_assert!((f * sum as f64 - b).abs() <= sum as f64 / a.slots_total as f64 + 1e-9);
            }
        }

        #[test]
        fn rounds_deliver_exactly(data in 1u64..1_000_000, slots in 1u32..8, burst in 1u32..2048, pack in 1u32..8) {
            let per_round = slots as u64 * burst as u64 * pack as u64;
            let ex = executions(data, slots, burst, pack);
            let mut left = data;
            for _ in 0..ex {
                left -= left.min(per_round);
            }
            prop_assert_eq!(left, 0);
            prop_assert!((ex - 1) * per_round < data);
        }
    }
}
