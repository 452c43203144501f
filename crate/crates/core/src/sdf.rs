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

//! Synchronous-dataflow performance model of one CNN engine.
//!
//! A subgraph is a contiguous run of hardware stages. For stage `v` with
//! `n_pe` processing elements of `n_op` operators each, the consumption rate is
//! `n_pe * n_op` elements per cycle, and one pass of a convolution processes
//! `f_in * n_out * k^2 * h_out * w_out` elements (`n_out * k^2 * h_out * w_out`
//! for pooling and nonlinear stages). A convolution whose input maps are tiled
//! by `f_in` needs `n_in / f_in` passes per input.
//!
//! Pipeline depth, the weight-load term and the resource model are model
//! parameters documented on the individual functions.

use std::ops::Range;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::model::{LayerKind, LayerSpec, NetworkSpec, Partitioning, PlatformSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceVector {
    pub lut: u64,
    pub ff: u64,
    pub dsp: u64,
    pub bram: u64,
}

impl ResourceVector {
    pub fn fits_in(&self, avail: &ResourceVector) -> bool {
        self.lut <= avail.lut && self.ff <= avail.ff && self.dsp <= avail.dsp && self.bram <= avail.bram
    }

    pub fn max(&self, other: &ResourceVector) -> ResourceVector {
        ResourceVector {
            lut: self.lut.max(other.lut),
            ff: self.ff.max(other.ff),
            dsp: self.dsp.max(other.dsp),
            bram: self.bram.max(other.bram),
        }
    }

    pub fn as_array(&self) -> [u64; 4] {
        [self.lut, self.ff, self.dsp, self.bram]
    }

    /// Mean utilisation across the four resource kinds.
    pub fn mean_utilisation(&self, avail: &ResourceVector) -> f64 {
        let u = self.as_array();
        let a = avail.as_array();
        u.iter().zip(a.iter()).map(|(&x, &y)| x as f64 / y.max(1) as f64).sum::<f64>() / 4.0
    }
}

impl std::ops::Add for ResourceVector {
    type Output = ResourceVector;
    fn add(self, o: ResourceVector) -> ResourceVector {
        ResourceVector {
            lut: self.lut + o.lut,
            ff: self.ff + o.ff,
            dsp: self.dsp + o.dsp,
            bram: self.bram + o.bram,
        }
    }
}

impl std::iter::Sum for ResourceVector {
    fn sum<I: Iterator<Item = ResourceVector>>(iter: I) -> ResourceVector {
        iter.fold(ResourceVector::default(), |a, b| a + b)
    }
}

/// Linear resource cost coefficients. The defaults are placeholders and should
/// be calibrated against synthesis reports for a real device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceCostModel {
    pub dsp_per_mult: u64,
    pub lut_per_op: u64,
    pub ff_per_op: u64,
    pub lut_per_pe: u64,
    pub ff_per_pe: u64,
    pub lut_per_stage: u64,
    pub ff_per_stage: u64,
    /// Capacity of one block RAM in bytes.
    pub bram_bytes: u64,
    /// Fixed fill latency added per stage to the pipeline depth.
    pub stage_latency_cycles: u64,
}

impl Default for ResourceCostModel {
    fn default() -> Self {
        ResourceCostModel {
            dsp_per_mult: 1,
            lut_per_op: 40,
            ff_per_op: 60,
            lut_per_pe: 120,
            ff_per_pe: 150,
            lut_per_stage: 800,
            ff_per_stage: 1000,
            bram_bytes: 2304,
            stage_latency_cycles: 16,
        }
    }
}

impl ResourceCostModel {
    pub fn validate(&self) -> Result<()> {
        if self.bram_bytes == 0 {
            return Err(Error::Validation("cost_model.bram_bytes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub t: LayerKind,
    pub n_pe: u32,
    pub n_op: u32,
    pub f_in: u32,
}

impl StageConfig {
    pub fn rate(&self) -> u64 {
        self.n_pe as u64 * self.n_op as u64
    }

    fn validate(&self, layer: &LayerSpec, index: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::Validation(format!("stage {}: {what}", index + 1)));
        if self.t != layer.kind {
            return bad("stage type does not match layer kind");
        }
        if self.n_pe == 0 || self.n_pe > layer.n_out {
            return bad("n_pe outside [1, n_out]");
        }
        if self.n_op == 0 || self.n_op > layer.k * layer.k {
            return bad("n_op outside [1, k^2]");
        }
        if self.f_in == 0 || self.f_in > layer.n_in {
            return bad("f_in outside [1, n_in]");
        }
        if self.t == LayerKind::Nonlin && (self.n_op != 1 || self.f_in != 1) {
            return bad("nonlin stages have n_op = 1 and f_in = 1");
        }
        if self.t == LayerKind::Pool && self.f_in != 1 {
            return bad("pool stages have f_in = 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub partitioning: Partitioning,
    pub stages: Vec<StageConfig>,
}

impl EngineConfig {
    pub fn validate(&self, net: &NetworkSpec) -> Result<()> {
        self.partitioning.validate(net)?;
        if self.stages.len() != net.layers.len() {
            return Err(Error::Validation(format!(
                "engine has {} stages for {} layers",
                self.stages.len(),
                net.layers.len()
            )));
        }
        for (i, (s, l)) in self.stages.iter().zip(&net.layers).enumerate() {
            s.validate(l, i)?;
            if s.f_in != self.partitioning.input_folds[i] {
                return Err(Error::Validation(format!(
                    "stage {}: f_in {} disagrees with partitioning fold {}",
                    i + 1,
                    s.f_in,
                    self.partitioning.input_folds[i]
                )));
            }
        }
        Ok(())
    }

    pub fn num_subgraphs(&self) -> usize {
        self.partitioning.num_subgraphs()
    }

    fn range(&self, net: &NetworkSpec, j: usize) -> Result<Range<usize>> {
        let ranges = self.partitioning.ranges(net.layers.len());
        ranges.get(j).cloned().ok_or_else(|| {
            Error::Model(format!("subgraph index {j} out of range ({} subgraphs)", ranges.len()))
        })
    }
}

/// Processing rates: `gamma[(e, v)]` in elements/cycle of stage `v` on arc `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyMatrix {
    pub gamma: Array2<f64>,
}

/// Elements produced or consumed by stage `v` on arc `e` for one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadMatrix {
    pub w: Array2<u64>,
}

/// Elements processed by one pass of a stage.
pub fn stage_workload(layer: &LayerSpec, stage: &StageConfig) -> u64 {
    let spatial = layer.n_out as u64 * (layer.k as u64).pow(2) * layer.h_out as u64 * layer.w_out as u64;
    match layer.kind {
        LayerKind::Conv => stage.f_in as u64 * spatial,
        LayerKind::Pool | LayerKind::Nonlin => spatial,
    }
}

/// Sequential passes per input caused by input-map tiling.
pub fn stage_passes(layer: &LayerSpec, stage: &StageConfig) -> u64 {
    match layer.kind {
        LayerKind::Conv => (layer.n_in / stage.f_in.max(1)).max(1) as u64,
        _ => 1,
    }
}

/// Chain-shaped SDF matrices of subgraph `j`: `|V|` stages and `|V| + 1` arcs,
/// arc `v` feeding stage `v` and arc `v + 1` leaving it.
///
/// Consumption entries hold `n_pe * n_op` and the stage's own workload. The
/// production entry of stage `v` on arc `v + 1` holds what the downstream
/// stage consumes there (the stage's own workload on the final arc), with the
/// production rate scaled so both arcs of a stage share one initiation
/// interval.
pub fn build_matrices(
    net: &NetworkSpec,
    cfg: &EngineConfig,
    subgraph_index: usize,
) -> Result<(TopologyMatrix, WorkloadMatrix)> {
    let range = cfg.range(net, subgraph_index)?;
    let nv = range.len();
    let work: Vec<u64> = range.clone().map(|i| stage_workload(&net.layers[i], &cfg.stages[i])).collect();
    let rate: Vec<f64> = range.clone().map(|i| cfg.stages[i].rate() as f64).collect();

    let mut gamma = Array2::<f64>::zeros((nv + 1, nv));
    let mut w = Array2::<u64>::zeros((nv + 1, nv));
    for v in 0..nv {
        gamma[(v, v)] = rate[v];
        w[(v, v)] = work[v];
        let produced = if v + 1 < nv { work[v + 1] } else { work[v] };
        w[(v + 1, v)] = produced;
        gamma[(v + 1, v)] = if work[v] == 0 { rate[v] } else { rate[v] * produced as f64 / work[v] as f64 };
    }
    Ok((TopologyMatrix { gamma }, WorkloadMatrix { w }))
}

/// Elementwise `W / Gamma` in cycles; zero wherever the workload is zero.
pub fn initiation_interval(w: &WorkloadMatrix, gamma: &TopologyMatrix) -> Result<Array2<f64>> {
    if w.w.dim() != gamma.gamma.dim() {
        return Err(Error::Model(format!(
            "workload shape {:?} does not match topology shape {:?}",
            w.w.dim(),
            gamma.gamma.dim()
        )));
    }
    let mut ii = Array2::<f64>::zeros(w.w.dim());
    for ((idx, &work), &rate) in w.w.indexed_iter().zip(gamma.gamma.iter()) {
        if work == 0 {
            continue;
        }
        if rate <= 0.0 {
            return Err(Error::Model(format!(
                "stage {} processes arc {} with zero rate",
                idx.1, idx.0
            )));
        }
        ii[idx] = work as f64 / rate;
    }
    Ok(ii)
}

pub fn ii_max(ii: &Array2<f64>) -> f64 {
    ii.iter().copied().fold(0.0, f64::max)
}

/// Execution time of a subgraph for a batch:
/// `(depth + II_max * (batch - 1) * tile_reps) / clock`.
pub fn subgraph_time(
    batch: u32,
    gamma: &TopologyMatrix,
    w: &WorkloadMatrix,
    depth_cycles: u64,
    tile_reps: u64,
    clock_hz: f64,
) -> Result<f64> {
    if batch == 0 {
        return Err(Error::Model("batch must be at least 1".into()));
    }
    let ii = initiation_interval(w, gamma)?;
    let steady = ii_max(&ii) * (batch - 1) as f64 * tile_reps as f64;
    Ok((depth_cycles as f64 + steady) / clock_hz)
}

/// Pipeline depth: cycles for one input to traverse every stage of the
/// subgraph (each stage's interval times its passes) plus a fixed fill
/// latency per stage.
pub fn depth_cycles(net: &NetworkSpec, cfg: &EngineConfig, subgraph_index: usize, stage_latency: u64) -> Result<u64> {
    let range = cfg.range(net, subgraph_index)?;
    let mut total = 0u64;
    for i in range {
        let (l, s) = (&net.layers[i], &cfg.stages[i]);
        let rate = s.rate();
        if rate == 0 {
            return Err(Error::Model(format!("stage {i} has zero rate")));
        }
        let ii = stage_workload(l, s).div_ceil(rate);
        total += ii * stage_passes(l, s) + stage_latency;
    }
    Ok(total)
}

/// Largest number of tiling passes over the stages of the subgraph.
pub fn tile_reps(net: &NetworkSpec, cfg: &EngineConfig, subgraph_index: usize) -> Result<u64> {
    let range = cfg.range(net, subgraph_index)?;
    Ok(range.map(|i| stage_passes(&net.layers[i], &cfg.stages[i])).max().unwrap_or(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgraphMetrics {
    /// Batch-1 compute time, `depth / clock`.
    pub compute_time_s: f64,
    /// Time to load the subgraph's weights at the full memory bandwidth.
    pub weights_time_s: f64,
    /// Standalone batch-1 latency L(s): compute plus weight load, and never
    /// shorter than moving all of the subgraph's data at full bandwidth.
    pub latency_s: f64,
    /// Average external bandwidth b(s) = total bytes / L(s).
    pub bandwidth_bytes_per_s: f64,
    pub ops: u64,
    pub weight_elements: u64,
    pub io_elements: u64,
    pub weight_bytes: f64,
    pub io_bytes: f64,
    pub depth_cycles: u64,
    pub ii_max: f64,
    pub tile_reps: u64,
}

impl SubgraphMetrics {
    pub fn total_elements(&self) -> u64 {
        self.weight_elements + self.io_elements
    }

    pub fn total_bytes(&self) -> f64 {
        self.weight_bytes + self.io_bytes
    }
}

pub fn subgraph_metrics(
    net: &NetworkSpec,
    cfg: &EngineConfig,
    subgraph_index: usize,
    platform: &PlatformSpec,
) -> Result<SubgraphMetrics> {
    let range = cfg.range(net, subgraph_index)?;
    let (gamma, w) = build_matrices(net, cfg, subgraph_index)?;
    let ii = initiation_interval(&w, &gamma)?;
    let depth = depth_cycles(net, cfg, subgraph_index, platform.cost_model.stage_latency_cycles)?;
    let reps = tile_reps(net, cfg, subgraph_index)?;

    let bpe = platform.bytes_per_element();
    let weight_elements: u64 = range.clone().map(|i| net.layers[i].weight_count()).sum();
    let io_elements = net.input_elements(range.start) + net.layers[range.end - 1].output_elements();
    let weight_bytes = weight_elements as f64 * bpe;
    let io_bytes = io_elements as f64 * bpe;

    let compute_time_s = subgraph_time(1, &gamma, &w, depth, reps, platform.clock_hz)?;
    let weights_time_s = weight_bytes / platform.b_mem;
    let transfer_floor = (weight_bytes + io_bytes) / platform.b_mem;
    let latency_s = (compute_time_s + weights_time_s).max(transfer_floor);
    Ok(SubgraphMetrics {
        compute_time_s,
        weights_time_s,
        latency_s,
        bandwidth_bytes_per_s: (weight_bytes + io_bytes) / latency_s,
        ops: range.map(|i| net.layers[i].ops()).sum(),
        weight_elements,
        io_elements,
        weight_bytes,
        io_bytes,
        depth_cycles: depth,
        ii_max: ii_max(&ii),
        tile_reps: reps,
    })
}

pub fn engine_metrics(net: &NetworkSpec, cfg: &EngineConfig, platform: &PlatformSpec) -> Result<Vec<SubgraphMetrics>> {
    (0..cfg.num_subgraphs()).map(|j| subgraph_metrics(net, cfg, j, platform)).collect()
}

/// End-to-end time of a batch over all subgraphs, plus the time to load each
/// subgraph's weights at `effective_bw` bytes/s. Folded convolutions reload
/// their weights for every input of the batch.
pub fn total_time(
    net: &NetworkSpec,
    cfg: &EngineConfig,
    batch: u32,
    platform: &PlatformSpec,
    effective_bw: f64,
) -> Result<f64> {
    let mut t = 0.0;
    for j in 0..cfg.num_subgraphs() {
        let (gamma, w) = build_matrices(net, cfg, j)?;
        let depth = depth_cycles(net, cfg, j, platform.cost_model.stage_latency_cycles)?;
        let reps = tile_reps(net, cfg, j)?;
        t += subgraph_time(batch, &gamma, &w, depth, reps, platform.clock_hz)?;
        let range = cfg.range(net, j)?;
        let weights: u64 = range.map(|i| net.layers[i].weight_count()).sum();
        let loads = if reps > 1 { batch as u64 } else { 1 };
        t += (weights * loads) as f64 * platform.bytes_per_element() / effective_bw;
    }
    Ok(t)
}

/// Average bandwidth b(s) of subgraph `j` in bytes/s.
pub fn bandwidth_demand(
    net: &NetworkSpec,
    cfg: &EngineConfig,
    subgraph_index: usize,
    platform: &PlatformSpec,
) -> Result<f64> {
    Ok(subgraph_metrics(net, cfg, subgraph_index, platform)?.bandwidth_bytes_per_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageResources {
    pub rsc: ResourceVector,
    pub line_buffer_brams: u64,
    pub weight_tile_brams: u64,
}

/// Cost of one hardware stage. Convolutions buffer `k` rows of each of their
/// `f_in` input maps and one weight tile of `f_in * n_out * k^2` values.
pub fn stage_resources(net: &NetworkSpec, layer_index: usize, stage: &StageConfig, platform: &PlatformSpec) -> StageResources {
    let cm = &platform.cost_model;
    let l = &net.layers[layer_index];
    let bpe = platform.bytes_per_element();
    let (_, w_in) = net.input_dims(layer_index);
    let brams = |elems: u64| ((elems as f64 * bpe) / cm.bram_bytes as f64).ceil() as u64;
    let pe = stage.n_pe as u64;
    let ops = stage.rate();
    let mut out = StageResources::default();
    match l.kind {
        LayerKind::Conv => {
            out.line_buffer_brams = brams(stage.f_in as u64 * l.k as u64 * w_in as u64);
            out.weight_tile_brams = brams(stage.f_in as u64 * l.n_out as u64 * (l.k as u64).pow(2));
            out.rsc = ResourceVector {
                lut: cm.lut_per_stage + pe * cm.lut_per_pe + ops * cm.lut_per_op,
                ff: cm.ff_per_stage + pe * cm.ff_per_pe + ops * cm.ff_per_op,
                dsp: ops * cm.dsp_per_mult,
                bram: out.line_buffer_brams + out.weight_tile_brams,
            };
        }
        LayerKind::Pool => {
            out.line_buffer_brams = brams(l.n_in as u64 * l.k as u64 * w_in as u64);
            out.rsc = ResourceVector {
                lut: cm.lut_per_stage + pe * cm.lut_per_pe + ops * cm.lut_per_op,
                ff: cm.ff_per_stage + pe * cm.ff_per_pe + ops * cm.ff_per_op,
                dsp: 0,
                bram: out.line_buffer_brams,
            };
        }
        LayerKind::Nonlin => {
            out.rsc = ResourceVector {
                lut: cm.lut_per_stage + pe * cm.lut_per_pe,
                ff: cm.ff_per_stage + pe * cm.ff_per_pe,
                dsp: 0,
                bram: 0,
            };
        }
    }
    out
}

/// Resources of the engine. One engine executes all subgraphs of its network
/// in turn, so it is sized for the most demanding subgraph, per resource kind.
pub fn resource_usage(net: &NetworkSpec, cfg: &EngineConfig, platform: &PlatformSpec) -> ResourceVector {
    cfg.partitioning
        .ranges(net.layers.len())
        .into_iter()
        .map(|r| r.map(|i| stage_resources(net, i, &cfg.stages[i], platform).rsc).sum::<ResourceVector>())
        .fold(ResourceVector::default(), |a, b| a.max(&b))
}
