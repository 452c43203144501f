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

//! Event-driven simulation of several engines sharing one memory port.
//!
//! The port serves one burst slot at a time. Each engine works through its
//! subgraph executions in order. An execution needs the subgraph's data
//! (weights and feature maps) and consumes it from an input FIFO at the
//! engine's nominal rate, `data / latency`. When the FIFO runs dry, the
//! engine stalls. A slot delivers at most one burst of elements and lands in
//! the FIFO when the slot ends. Time is counted in engine clock cycles.
//!
//! Two arbitration policies are modelled:
//!
//! * memory-aware: executions are released at their scheduled start in every
//!   cycle period and the port is granted round-robin, each engine keeping it
//!   for the number of consecutive slots in the configuration table;
//! * contention-unaware: engines run back to back without pacing and every
//!   slot goes to a uniformly random requester, lasting longer the more
//!   engines compete for the port.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hsched::{build_config_table, HsConfigTable, DEFAULT_MAX_SLOTS_TOTAL};
use crate::model::PlatformSpec;
use crate::optimizer::{full_bandwidth_fps, memory_aware_dse, DseConfig, Objective};
use crate::pareto::JointDesignPoint;
use crate::{Error, Result};

/// Burst-time inflation per additional competing requester.
pub const DEFAULT_CONTENTION_PENALTY: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub enum SimPolicy {
    MemoryAware(HsConfigTable),
    ContentionUnaware,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub duration_frames: u32,
    /// FIFO capacity in elements. Defaults to two rounds of the largest
    /// per-round delivery.
    pub fifo_depth: Option<u64>,
    pub seed: u64,
    pub contention_penalty: f64,
    pub trace: bool,
    pub utilisation_samples: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            duration_frames: 8,
            fifo_depth: None,
            seed: 0,
            contention_penalty: DEFAULT_CONTENTION_PENALTY,
            trace: false,
            utilisation_samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub policy: SimPolicy,
    pub options: SimOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Grant { start_cycle: f64, end_cycle: f64, cnn: usize, subgraph: usize, elements: u64 },
    Start { cycle: f64, cnn: usize, frame: u32, subgraph: usize },
    Finish { cycle: f64, cnn: usize, frame: u32, subgraph: usize, stall_cycles: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilisationSample {
    pub start_s: f64,
    pub end_s: f64,
    pub utilisation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub fps: Vec<f64>,
    pub frame_completion_s: Vec<Vec<f64>>,
    /// Mean activation-to-completion time per network and subgraph.
    pub subgraph_latency_s: Vec<Vec<f64>>,
    pub stall_cycles: Vec<u64>,
    pub delivered_elements: Vec<u64>,
    pub demanded_elements: Vec<u64>,
    pub utilisation: Vec<UtilisationSample>,
    pub makespan_s: f64,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone)]
struct Job {
    frame: u32,
    subgraph: usize,
    release: f64,
    data: u64,
    duration: f64,
    slots: u32,
}

/// Per-subgraph parameters of one engine; executions repeat indefinitely.
#[derive(Debug, Clone)]
struct JobPlan {
    data: Vec<u64>,
    duration: Vec<f64>,
    /// Release offset and slots per (repetition, subgraph), memory-aware only.
    paced: Option<(Vec<Vec<(f64, u32)>>, f64)>,
}

impl JobPlan {
    fn job(&self, index: usize) -> Job {
        let n_sub = self.data.len();
        let (frame, subgraph) = ((index / n_sub) as u32, index % n_sub);
        let (release, slots) = match &self.paced {
            None => (0.0, 1),
            Some((offsets, period)) => {
                let rep = offsets.len() as u32;
                let (off, slots) = offsets[(frame % rep) as usize][subgraph];
                ((frame / rep) as f64 * period + off, slots)
            }
        };
        Job { frame, subgraph, release, data: self.data[subgraph], duration: self.duration[subgraph], slots }
    }
}

#[derive(Debug, Clone)]
struct Engine {
    plan: JobPlan,
    cur: usize,
    job: Job,
    active: bool,
    activate_at: f64,
    clock: f64,
    fifo: f64,
    inflight: u64,
    to_deliver: u64,
    started: f64,
    stall: f64,
    job_stall: f64,
    delivered: u64,
    demanded: u64,
    completions: Vec<f64>,
    latency_sum: Vec<f64>,
    latency_count: Vec<u32>,
}

/// Fluid element counts closer than this are treated as equal.
const ELEM_TOL: f64 = 1e-3;

impl Engine {
    fn new(plan: JobPlan) -> Engine {
        let job = plan.job(0);
        let n_sub = plan.data.len();
        Engine {
            activate_at: job.release,
            job,
            plan,
            cur: 0,
            active: false,
            clock: 0.0,
            fifo: 0.0,
            inflight: 0,
            to_deliver: 0,
            started: 0.0,
            stall: 0.0,
            job_stall: 0.0,
            delivered: 0,
            demanded: 0,
            completions: Vec::new(),
            latency_sum: vec![0.0; n_sub],
            latency_count: vec![0; n_sub],
        }
    }

    fn rate(&self) -> f64 {
        self.job.data as f64 / self.job.duration
    }

    fn chunk(&self, burst_elems: u64) -> u64 {
        self.to_deliver.min(burst_elems)
    }

    fn is_requester(&self, depth: u64, burst_elems: u64) -> bool {
        self.active
            && self.to_deliver > 0
            && depth as f64 - self.fifo - self.inflight as f64 >= self.chunk(burst_elems) as f64 - ELEM_TOL
    }

    fn next_event(&self, depth: u64, burst_elems: u64) -> f64 {
        if !self.active {
            return self.activate_at;
        }
        if self.job.data == 0 {
            return self.started + self.job.duration;
        }
        if self.fifo <= ELEM_TOL {
            let drained = self.to_deliver == 0 && self.inflight == 0;
            return if drained { self.clock } else { f64::INFINITY };
        }
        let rate = self.rate();
        let mut t = self.clock + self.fifo / rate;
        if self.to_deliver > 0 {
            let free = depth as f64 - self.fifo - self.inflight as f64;
            let need = self.chunk(burst_elems) as f64 - free;
            if need > ELEM_TOL {
                t = t.min(self.clock + need / rate);
            }
        }
        t
    }

    /// Consumes data up to `t`; returns the completion time if the current
    /// execution finishes on the way.
    fn advance(&mut self, t: f64) -> Option<f64> {
        let dt = t - self.clock;
        self.clock = t;
        if !self.active {
            return None;
        }
        if self.job.data == 0 {
            let end = self.started + self.job.duration;
            return (end <= t).then_some(end);
        }
        let can = self.rate() * dt;
        if can < self.fifo - ELEM_TOL {
            self.fifo -= can;
            return None;
        }
        let drain = self.fifo / self.rate();
        self.fifo = 0.0;
        self.stall += (dt - drain).max(0.0);
        self.job_stall += (dt - drain).max(0.0);
        if self.to_deliver == 0 && self.inflight == 0 {
            Some(t - dt + drain)
        } else {
            None
        }
    }

    fn activate(&mut self, at: f64) {
        self.active = true;
        self.started = at;
        self.fifo = 0.0;
        self.inflight = 0;
        self.job_stall = 0.0;
        self.to_deliver = self.job.data;
    }

    fn complete(&mut self, at: f64) {
        let sub = self.job.subgraph;
        self.latency_sum[sub] += at - self.started;
        self.latency_count[sub] += 1;
        self.demanded += self.job.data;
        if sub + 1 == self.latency_sum.len() {
            self.completions.push(at);
        }
        self.active = false;
        self.cur += 1;
        self.job = self.plan.job(self.cur);
        self.activate_at = self.job.release.max(at);
    }
}

enum Arbiter {
    RoundRobin { pos: usize, used: u32 },
    Random { rng: ChaCha8Rng, penalty: f64 },
}

/// Simulates `sigma` until every network has completed `duration_frames`
/// frames. Engines that get there first keep running, so the contention seen
/// by the slower ones stays the same throughout.
pub fn simulate(sigma: &JointDesignPoint, cfg: &SimConfig, platform: &PlatformSpec) -> Result<SimResult> {
    let opts = &cfg.options;
    if opts.duration_frames == 0 {
        return Err(Error::Config("duration_frames must be at least 1".into()));
    }
    if !(opts.contention_penalty >= 0.0) {
        return Err(Error::Config("contention penalty must be non-negative".into()));
    }
    let n = sigma.points.len();
    let clock = platform.clock_hz;
    let burst_elems = platform.burst_length as u64 * platform.pack_factor() as u64;
    let slot_cycles = platform.burst_length as f64 * platform.beat_time_s() * clock;
    let frames = opts.duration_frames as usize;

    if let SimPolicy::MemoryAware(table) = &cfg.policy {
        if table.rep.len() != n || table.rep.contains(&0) || table.entries.iter().any(|e| e.cnn >= n) {
            return Err(Error::Validation("configuration table does not match the design point".into()));
        }
    }
    let mut max_round = burst_elems;
    let mut engines = Vec::with_capacity(n);
    for (i, p) in sigma.points.iter().enumerate() {
        if p.metrics.is_empty() {
            return Err(Error::Validation(format!("design point of cnn {i} has no subgraphs")));
        }
        let paced = match &cfg.policy {
            SimPolicy::ContentionUnaware => None,
            SimPolicy::MemoryAware(table) => {
                if table.entries.iter().any(|e| e.cnn == i && e.subgraph >= p.metrics.len()) {
                    return Err(mismatch(i));
                }
                let mut offsets = Vec::new();
                for k in 0..table.rep[i] {
                    let mut row = Vec::new();
                    for (j, m) in p.metrics.iter().enumerate() {
                        let e = table.entry(i, k, j).ok_or_else(|| mismatch(i))?;
                        if e.data_elements != m.total_elements() {
                            return Err(mismatch(i));
                        }
                        max_round = max_round.max(table.per_round(e));
                        row.push((e.start_s * clock, e.slots));
                    }
                    offsets.push(row);
                }
                Some((offsets, table.cycle_time_s * clock))
            }
        };
        engines.push(Engine::new(JobPlan {
            data: p.metrics.iter().map(|m| m.total_elements()).collect(),
            duration: p.metrics.iter().map(|m| m.latency_s * clock).collect(),
            paced,
        }));
    }
    let depth = opts.fifo_depth.unwrap_or(2 * max_round);
    if depth < burst_elems {
        return Err(Error::Config(format!(
            "FIFO depth {depth} is smaller than one burst delivery of {burst_elems} elements"
        )));
    }

    let mut arbiter = match cfg.policy {
        SimPolicy::MemoryAware(_) => Arbiter::RoundRobin { pos: 0, used: 0 },
        SimPolicy::ContentionUnaware => Arbiter::Random {
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            penalty: opts.contention_penalty,
        },
    };
    let mut trace = Vec::new();
    let mut grants: Vec<(f64, f64, u64)> = Vec::new();
    // (engine, elements, end)
    let mut port: Option<(usize, u64, f64)> = None;
    let mut t = 0.0f64;
    loop {
        for (i, e) in engines.iter_mut().enumerate() {
            if !e.active && e.activate_at <= t {
                let at = e.activate_at;
                e.activate(at);
                if opts.trace {
                    trace.push(TraceEvent::Start { cycle: at, cnn: i, frame: e.job.frame, subgraph: e.job.subgraph });
                }
            }
        }
        if engines.iter().all(|e| e.completions.len() >= frames) {
            break;
        }
        if port.is_none() {
            let requesters: Vec<usize> = (0..n).filter(|&i| engines[i].is_requester(depth, burst_elems)).collect();
            let pick = match &mut arbiter {
                _ if requesters.is_empty() => None,
                Arbiter::RoundRobin { pos, used } => {
                    if requesters.contains(pos) && *used < engines[*pos].job.slots {
                        *used += 1;
                    } else {
                        let next = (1..=n).map(|k| (*pos + k) % n).find(|i| requesters.contains(i)).expect("nonempty");
                        *pos = next;
                        *used = 1;
                    }
                    Some((*pos, slot_cycles))
                }
                Arbiter::Random { rng, penalty } => {
                    let i = requesters[rng.gen_range(0..requesters.len())];
                    // every engine with a transfer outstanding competes for the port
                    let streams = engines.iter().filter(|e| e.active && e.to_deliver > 0).count();
                    Some((i, slot_cycles * (1.0 + *penalty * streams.saturating_sub(1) as f64)))
                }
            };
            if let Some((i, dur)) = pick {
                let e = &mut engines[i];
                let elems = e.chunk(burst_elems);
                e.to_deliver -= elems;
                e.inflight += elems;
                port = Some((i, elems, t + dur));
                grants.push((t, t + dur, elems));
                if opts.trace {
                    trace.push(TraceEvent::Grant {
                        start_cycle: t,
                        end_cycle: t + dur,
                        cnn: i,
                        subgraph: e.job.subgraph,
                        elements: elems,
                    });
                }
            }
        }

        let mut t_next = port.map_or(f64::INFINITY, |p| p.2);
        for e in &engines {
            t_next = t_next.min(e.next_event(depth, burst_elems));
        }
        if !t_next.is_finite() {
            return Err(Error::Internal("simulation stalled with no pending event".into()));
        }
        let t_next = t_next.max(t);
        for (i, e) in engines.iter_mut().enumerate() {
            if let Some(end) = e.advance(t_next) {
                if opts.trace {
                    trace.push(TraceEvent::Finish {
                        cycle: end,
                        cnn: i,
                        frame: e.job.frame,
                        subgraph: e.job.subgraph,
                        stall_cycles: e.job_stall,
                    });
                }
                e.complete(end);
            }
        }
        if let Some((i, elems, end)) = port {
            if end <= t_next {
                let e = &mut engines[i];
                e.fifo += elems as f64;
                e.inflight -= elems;
                e.delivered += elems;
                port = None;
            }
        }
        t = t_next;
    }

    let to_s = |c: f64| c / clock;
    let reps: Vec<u32> = match &cfg.policy {
        SimPolicy::MemoryAware(table) => table.rep.clone(),
        SimPolicy::ContentionUnaware => vec![1; n],
    };
    let fps = engines.iter().zip(&reps).map(|(e, &r)| steady_fps(&e.completions, r, clock)).collect();
    let bpe = platform.bytes_per_element();
    let samples = opts.utilisation_samples.max(1);
    let window = t / samples as f64;
    let utilisation = (0..samples)
        .map(|k| {
            let (a, b) = (k as f64 * window, (k + 1) as f64 * window);
            let bytes: f64 = grants
                .iter()
                .map(|&(s, e, el)| {
                    let overlap = (b.min(e) - a.max(s)).max(0.0);
                    if e > s { el as f64 * bpe * overlap / (e - s) } else { 0.0 }
                })
                .sum();
            UtilisationSample { start_s: to_s(a), end_s: to_s(b), utilisation: bytes / (platform.b_mem * to_s(window)) }
        })
        .collect();
    Ok(SimResult {
        fps,
        frame_completion_s: engines.iter().map(|e| e.completions.iter().map(|&c| to_s(c)).collect()).collect(),
        subgraph_latency_s: engines
            .iter()
            .map(|e| e.latency_sum.iter().zip(&e.latency_count).map(|(&s, &c)| to_s(s / c.max(1) as f64)).collect())
            .collect(),
        stall_cycles: engines.iter().map(|e| e.stall.round() as u64).collect(),
        // deliveries to the execution still in progress are not counted
        delivered_elements: engines.iter().map(|e| e.delivered - (e.job.data - e.to_deliver - e.inflight) * e.active as u64).collect(),
        demanded_elements: engines.iter().map(|e| e.demanded).collect(),
        utilisation,
        makespan_s: to_s(t),
        trace,
    })
}

fn mismatch(cnn: usize) -> Error {
    Error::Validation(format!("configuration table does not match the design point of cnn {cnn}"))
}

/// Frame rate over whole cycle periods at the end of the run, or over the
/// whole run when it is shorter than one period plus a frame.
fn steady_fps(completions: &[f64], rep: u32, clock: f64) -> f64 {
    let f = completions.len();
    let rep = rep.max(1) as usize;
    let periods = (f.saturating_sub(1)) / rep;
    if periods >= 1 {
        let span = completions[f - 1] - completions[f - 1 - periods * rep];
        (periods * rep) as f64 * clock / span
    } else {
        f as f64 * clock / completions[f - 1]
    }
}

/// Objective values of one joint point under the three assumptions: full
/// bandwidth for every engine, contention-unaware arbitration, and the
/// memory-aware schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub predicted: f64,
    pub unaware: f64,
    pub aware: f64,
    pub predicted_fps: Vec<f64>,
    pub unaware_fps: Vec<f64>,
    pub aware_fps: Vec<f64>,
}

/// Simulates `sigma` under a memory-aware schedule optimised for it.
pub fn simulate_memory_aware(
    sigma: &JointDesignPoint,
    platform: &PlatformSpec,
    obj: &Objective,
    dse: &DseConfig,
    options: &SimOptions,
) -> Result<(SimResult, HsConfigTable)> {
    let result = memory_aware_dse(std::slice::from_ref(sigma), obj, platform.b_mem, dse)?;
    let table = build_config_table(&result.schedule, sigma, platform, DEFAULT_MAX_SLOTS_TOTAL)?;
    let cfg = SimConfig { policy: SimPolicy::MemoryAware(table.clone()), options: options.clone() };
    Ok((simulate(sigma, &cfg, platform)?, table))
}

pub fn compare_policies(
    sigma: &JointDesignPoint,
    platform: &PlatformSpec,
    obj: &Objective,
    dse: &DseConfig,
    options: &SimOptions,
) -> Result<PolicyComparison> {
    let predicted_fps = full_bandwidth_fps(sigma);
    let unaware = simulate(sigma, &SimConfig { policy: SimPolicy::ContentionUnaware, options: options.clone() }, platform)?;
    let (aware, _) = simulate_memory_aware(sigma, platform, obj, dse, options)?;
    Ok(PolicyComparison {
        predicted: obj.score(&predicted_fps),
        unaware: obj.score(&unaware.fps),
        aware: obj.score(&aware.fps),
        predicted_fps,
        unaware_fps: unaware.fps,
        aware_fps: aware.fps,
    })
}

/// Geometric mean of per-network throughput ratios `aware / baseline`.
pub fn geo_mean_speedup(baseline_fps: &[f64], aware_fps: &[f64]) -> Result<f64> {
    if baseline_fps.is_empty() || baseline_fps.len() != aware_fps.len() {
        return Err(Error::Validation("speed-up needs one rate per network on both sides".into()));
    }
    if baseline_fps.iter().chain(aware_fps).any(|&f| !(f.is_finite() && f > 0.0)) {
        return Err(Error::Validation("frame rates must be positive to form a speed-up".into()));
    }
    let mean_ln = baseline_fps.iter().zip(aware_fps).map(|(b, a)| (a / b).ln()).sum::<f64>() / baseline_fps.len() as f64;
    Ok(mean_ln.exp())
}

/// Relative objective reduction of the memory-aware policy, in percent.
/// Zero when the baseline is already optimal.
pub fn objective_gain_percent(baseline: f64, aware: f64) -> f64 {
    if baseline > 0.0 { 100.0 * (baseline - aware) / baseline } else { 0.0 }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::optimizer::{ObjectiveKind, References, RepMode};
    use crate::optimizer::tests::joint;
    use crate::sdf::tests::platform;

    /// Joint point whose subgraphs take `latency` seconds and move data at
    /// `share` of the platform bandwidth.
    pub(crate) fn synthetic(subgraphs: &[Vec<(f64, f64)>], p: &PlatformSpec) -> JointDesignPoint {
        let mut j = joint(subgraphs);
        for (pt, sgs) in j.points.iter_mut().zip(subgraphs) {
            for (m, &(l, share)) in pt.metrics.iter_mut().zip(sgs) {
                m.io_elements = (share * p.b_mem * l / p.bytes_per_element()).round() as u64;
                m.io_bytes = m.io_elements as f64 * p.bytes_per_element();
                m.bandwidth_bytes_per_s = m.io_bytes / l;
            }
        }
        j
    }

    fn maxthrpt(n: usize) -> Objective {
        let nets: Vec<_> = (0..n)
            .map(|i| crate::model::NetworkSpec::new(format!("n{i}"), vec![crate::model::tests::layer(crate::model::LayerKind::Conv, 1, 1, 1)], None).unwrap())
            .collect();
        let refs = nets.iter().map(|n| References { fps_max: 1000.0, t_max: n.ops() as f64 * 1000.0 }).collect();
        Objective::new(ObjectiveKind::MaxThrpt, &nets, refs).unwrap()
    }

    fn unaware(frames: u32, seed: u64) -> SimConfig {
        SimConfig {
            policy: SimPolicy::ContentionUnaware,
            options: SimOptions { duration_frames: frames, seed, trace: true, ..SimOptions::default() },
        }
    }

    fn aware_table(sigma: &JointDesignPoint, p: &PlatformSpec) -> HsConfigTable {
        let obj = maxthrpt(sigma.points.len());
        let r = memory_aware_dse(std::slice::from_ref(sigma), &obj, p.b_mem, &DseConfig::default()).unwrap();
        build_config_table(&r.schedule, sigma, p, DEFAULT_MAX_SLOTS_TOTAL).unwrap()
    }

    #[test]
    fn exclusive_run_matches_analytic_latency() {
        let p = platform();
        let sigma = synthetic(&[vec![(1e-3, 0.3), (2e-3, 0.8), (0.5e-3, 1.0)]], &p);
        let analytic: f64 = sigma.points[0].metrics.iter().map(|m| m.latency_s).sum();
        let r = simulate(&sigma, &unaware(1, 1), &p).unwrap();
        let t = r.frame_completion_s[0][0];
        assert!(t >= analytic && t <= analytic * 1.02, "{t} vs {analytic}");
    }

    #[test]
    fn conservation_and_exclusivity() {
        let p = platform();
        let sigma = synthetic(&[vec![(1e-3, 0.5), (1e-3, 0.3)], vec![(1.5e-3, 0.6)], vec![(0.7e-3, 0.4)]], &p);
        let table = aware_table(&sigma, &p);
        let slot = p.burst_length as f64 * p.beat_time_s() * p.clock_hz;
        for cfg in [
            unaware(3, 7),
            SimConfig {
                policy: SimPolicy::MemoryAware(table),
                options: SimOptions { duration_frames: 3, trace: true, ..SimOptions::default() },
            },
        ] {
            let r = simulate(&sigma, &cfg, &p).unwrap();
            assert_eq!(r.delivered_elements, r.demanded_elements);
            let mut grants: Vec<(f64, f64)> = r
                .trace
                .iter()
                .filter_map(|e| match e {
                    TraceEvent::Grant { start_cycle, end_cycle, .. } => Some((*start_cycle, *end_cycle)),
                    _ => None,
                })
                .collect();
            grants.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in grants.windows(2) {
                assert!(w[0].1 <= w[1].0 + 1e-9);
            }
            if matches!(cfg.policy, SimPolicy::MemoryAware(_)) {
                assert!(grants.iter().all(|g| ((g.1 - g.0) - slot).abs() < 1e-9));
                assert!(r.utilisation.iter().all(|u| u.utilisation <= 1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = platform();
        let sigma = synthetic(&[vec![(1e-3, 0.7)], vec![(1e-3, 0.6)]], &p);
        let a = simulate(&sigma, &unaware(2, 42), &p).unwrap();
        let b = simulate(&sigma, &unaware(2, 42), &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn memory_aware_tracks_schedule_rate() {
        let p = platform();
        let sigma = synthetic(&[vec![(1e-3, 0.5), (0.6e-3, 0.2)], vec![(1.2e-3, 0.45)], vec![(0.8e-3, 0.35)]], &p);
        let table = aware_table(&sigma, &p);
        let cfg = SimConfig {
            policy: SimPolicy::MemoryAware(table.clone()),
            options: SimOptions { duration_frames: 6, ..SimOptions::default() },
        };
        let r = simulate(&sigma, &cfg, &p).unwrap();
        for i in 0..3 {
            let predicted = table.rep[i] as f64 / table.cycle_time_s;
            assert!((r.fps[i] - predicted).abs() <= 0.05 * predicted, "cnn {i}: {} vs {predicted}", r.fps[i]);
        }
    }

    #[test]
    fn unaware_loses_when_oversubscribed() {
        let p = platform();
        // aggregate demand twice the bandwidth
        let sigma = synthetic(&[vec![(1e-3, 0.7)], vec![(1e-3, 0.7)], vec![(1e-3, 0.6)]], &p);
        let u = simulate(&sigma, &unaware(6, 3), &p).unwrap();
        let table = aware_table(&sigma, &p);
        let cfg = SimConfig { policy: SimPolicy::MemoryAware(table), options: SimOptions { duration_frames: 6, ..SimOptions::default() } };
        let a = simulate(&sigma, &cfg, &p).unwrap();
        assert!(a.fps.iter().sum::<f64>() > u.fps.iter().sum::<f64>());
    }

    #[test]
    fn small_fifo_is_config_error() {
        let p = platform();
        let sigma = synthetic(&[vec![(1e-3, 0.5)]], &p);
        let mut cfg = unaware(1, 0);
        cfg.options.fifo_depth = Some(100);
        assert!(matches!(simulate(&sigma, &cfg, &p), Err(Error::Config(_))));
    }

    #[test]
    fn mismatched_table_is_error() {
        let p = platform();
        let sigma = synthetic(&[vec![(1e-3, 0.5)], vec![(1e-3, 0.5)]], &p);
        let table = aware_table(&sigma, &p);
        let other = synthetic(&[vec![(1e-3, 0.5), (1e-3, 0.1)], vec![(1e-3, 0.5)]], &p);
        let cfg = SimConfig { policy: SimPolicy::MemoryAware(table), options: SimOptions::default() };
        assert!(simulate(&other, &cfg, &p).is_err());
    }

    #[test]
    fn uncontended_triple_agrees() {
        let p = platform();
        let sigma = synthetic(&[vec![(1e-3, 0.2)], vec![(2e-3, 0.3)]], &p);
        let dse = DseConfig { rep: RepMode::Search { max_rep: 4 }, ..DseConfig::default() };
        let c = compare_policies(&sigma, &p, &maxthrpt(2), &dse, &SimOptions::default()).unwrap();
        for (x, y) in [(c.predicted, c.unaware), (c.predicted, c.aware)] {
            assert!((x - y).abs() <= 0.02 * x.max(1e-12), "{c:?}");
        }
    }

    #[test]
    fn prediction_bounds_both_simulations() {
        let p = platform();
        let sigma = synthetic(&[vec![(1e-3, 0.7), (0.5e-3, 0.4)], vec![(1e-3, 0.7)], vec![(0.9e-3, 0.5)]], &p);
        let dse = DseConfig { rep: RepMode::Search { max_rep: 4 }, ..DseConfig::default() };
        let c = compare_policies(&sigma, &p, &maxthrpt(3), &dse, &SimOptions::default()).unwrap();
        assert!(c.predicted <= c.unaware && c.predicted <= c.aware, "{c:?}");
        assert!(c.aware <= c.unaware, "{c:?}");
    }

    #[test]
    fn report_helpers() {
        assert_eq!(geo_mean_speedup(&[10.0, 20.0], &[10.0, 20.0]).unwrap(), 1.0);
        // ratios 2 and 8: geometric mean 4
        assert!((geo_mean_speedup(&[1.0, 1.0], &[2.0, 8.0]).unwrap() - 4.0).abs() < 1e-12);
        assert!(geo_mean_speedup(&[1.0], &[0.0]).is_err());
        assert_eq!(objective_gain_percent(0.5, 0.5), 0.0);
        assert_eq!(objective_gain_percent(0.5, 0.25), 50.0);
        assert_eq!(objective_gain_percent(0.0, 0.0), 0.0);
    }
}
