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

//! Network and platform descriptions, and the partitioning space of a network.
//!
//! Networks are linear chains of convolution, pooling and nonlinearity layers.
//! Both file formats are TOML documents; unknown keys are rejected. See
//! `docs/FORMATS.md` for the field-by-field reference.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::sdf::{ResourceCostModel, ResourceVector};
use crate::util::divisors;
use crate::{Error, Result};

/// Default cap on the number of subgraphs a network may be split into.
pub const DEFAULT_MAX_SUBGRAPHS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Pool,
    Nonlin,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LayerKind::Conv => "conv",
            LayerKind::Pool => "pool",
            LayerKind::Nonlin => "nonlin",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub n_in: u32,
    pub n_out: u32,
    /// Square filter or pooling window size.
    pub k: u32,
    pub stride: u32,
    pub h_out: u32,
    pub w_out: u32,
}

impl LayerSpec {
    pub fn weight_count(&self) -> u64 {
        match self.kind {
            LayerKind::Conv => self.n_in as u64 * self.n_out as u64 * (self.k as u64).pow(2),
            _ => 0,
        }
    }

    pub fn output_elements(&self) -> u64 {
        self.n_out as u64 * self.h_out as u64 * self.w_out as u64
    }

    /// Multiply-accumulate count of one inference (zero for non-conv layers).
    pub fn macs(&self) -> u64 {
        self.weight_count() * self.h_out as u64 * self.w_out as u64
    }

    /// Arithmetic operations of one inference: 2 per MAC for convolutions, one
    /// per window element for pooling and one per element for nonlinearities.
    pub fn ops(&self) -> u64 {
        match self.kind {
            LayerKind::Conv => 2 * self.macs(),
            LayerKind::Pool => self.output_elements() * (self.k as u64).pow(2),
            LayerKind::Nonlin => self.output_elements(),
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let pos = index + 1;
        for (name, v) in [
            ("n_in", self.n_in),
            ("n_out", self.n_out),
            ("k", self.k),
            ("stride", self.stride),
            ("h_out", self.h_out),
            ("w_out", self.w_out),
        ] {
            if v == 0 {
                return Err(Error::Validation(format!("layer {pos}: {name} must be at least 1")));
            }
        }
        if self.kind == LayerKind::Nonlin && (self.k != 1 || self.n_out != self.n_in) {
            return Err(Error::Validation(format!(
                "layer {pos}: nonlin layers need k = 1 and n_out = n_in"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    /// Requested frame rate, if the user has one for this model.
    pub fps_target: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fps_target: Option<f64>,
    #[serde(default)]
    layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>, fps_target: Option<f64>) -> Result<Self> {
        let net = NetworkSpec { name: name.into(), layers, fps_target };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Validation("network name must not be empty".into()));
        }
        if let Some(fps) = self.fps_target {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(Error::Validation(format!("fps_target must be positive, got {fps}")));
            }
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(i)?;
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[1].n_in != pair[0].n_out {
                return Err(Error::Validation(format!(
                    "layer {} (n_in = {}) does not match layer {} (n_out = {})",
                    i + 2,
                    pair[1].n_in,
                    i + 1,
                    pair[0].n_out
                )));
            }
        }
        if !self.layers.iter().any(|l| l.kind == LayerKind::Conv) {
            return Err(Error::Validation(format!(
                "network '{}' needs at least one Conv layer",
                self.name
            )));
        }
        Ok(())
    }

    /// Spatial size of the feature map entering layer `index`. For the first
    /// layer this assumes size-preserving padding, i.e. `h_out * stride`.
    pub fn input_dims(&self, index: usize) -> (u32, u32) {
        if index == 0 {
            let l = &self.layers[0];
            (l.h_out * l.stride, l.w_out * l.stride)
        } else {
            let p = &self.layers[index - 1];
            (p.h_out, p.w_out)
        }
    }

    pub fn input_elements(&self, index: usize) -> u64 {
        let (h, w) = self.input_dims(index);
        self.layers[index].n_in as u64 * h as u64 * w as u64
    }

    pub fn ops(&self) -> u64 {
        self.layers.iter().map(LayerSpec::ops).sum()
    }
}

pub fn parse_network(text: &str) -> Result<NetworkSpec> {
    let file: NetworkFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    NetworkSpec::new(file.name, file.layers, file.fps_target)
}

pub fn network_to_string(net: &NetworkSpec) -> String {
    let file = NetworkFile {
        name: net.name.clone(),
        fps_target: net.fps_target,
        layers: net.layers.clone(),
    };
    toml::to_string(&file).expect("network serialisation cannot fail")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformSpec {
    pub rsc_avail: ResourceVector,
    /// External memory bandwidth in bytes per second.
    pub b_mem: f64,
    pub clock_hz: f64,
    pub port_width_bits: u32,
    pub wordlength_bits: u32,
    /// Beats per burst, which is also the length of one arbiter slot.
    pub burst_length: u32,
    pub cost_model: ResourceCostModel,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlatformFile {
    lut: u64,
    ff: u64,
    dsp: u64,
    bram: u64,
    b_mem_bytes_per_s: f64,
    clock_hz: f64,
    port_width_bits: u32,
    wordlength_bits: u32,
    burst_length: u32,
    #[serde(default)]
    cost_model: ResourceCostModel,
}

impl PlatformSpec {
    pub fn validate(&self) -> Result<()> {
        let r = &self.rsc_avail;
        for (name, v) in [("lut", r.lut), ("ff", r.ff), ("dsp", r.dsp), ("bram", r.bram)] {
            if v == 0 {
                return Err(Error::Validation(format!("platform {name} must be positive")));
            }
        }
        for (name, v) in [("b_mem_bytes_per_s", self.b_mem), ("clock_hz", self.clock_hz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("platform {name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("port_width_bits", self.port_width_bits),
            ("wordlength_bits", self.wordlength_bits),
            ("burst_length", self.burst_length),
        ] {
            if v == 0 {
                return Err(Error::Validation(format!("platform {name} must be positive")));
            }
        }
        if self.port_width_bits % self.wordlength_bits != 0 {
            return Err(Error::Validation(format!(
                "port_width_bits ({}) must be a multiple of wordlength_bits ({})",
                self.port_width_bits, self.wordlength_bits
            )));
        }
        self.cost_model.validate()
    }

    /// Elements moved per memory beat.
    pub fn pack_factor(&self) -> u32 {
        self.port_width_bits / self.wordlength_bits
    }

    pub fn bytes_per_element(&self) -> f64 {
        self.wordlength_bits as f64 / 8.0
    }

    /// Duration of one memory beat in seconds at the full bandwidth.
    pub fn beat_time_s(&self) -> f64 {
        (self.port_width_bits as f64 / 8.0) / self.b_mem
    }

    pub fn with_b_mem(&self, b_mem: f64) -> PlatformSpec {
        PlatformSpec { b_mem, ..self.clone() }
    }
}

pub fn parse_platform(text: &str) -> Result<PlatformSpec> {
    let f: PlatformFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let p = PlatformSpec {
        rsc_avail: ResourceVector { lut: f.lut, ff: f.ff, dsp: f.dsp, bram: f.bram },
        b_mem: f.b_mem_bytes_per_s,
        clock_hz: f.clock_hz,
        port_width_bits: f.port_width_bits,
        wordlength_bits: f.wordlength_bits,
        burst_length: f.burst_length,
        cost_model: f.cost_model,
    };
    p.validate()?;
    Ok(p)
}

pub fn platform_to_string(p: &PlatformSpec) -> String {
    let f = PlatformFile {
        lut: p.rsc_avail.lut,
        ff: p.rsc_avail.ff,
        dsp: p.rsc_avail.dsp,
        bram: p.rsc_avail.bram,
        b_mem_bytes_per_s: p.b_mem,
        clock_hz: p.clock_hz,
        port_width_bits: p.port_width_bits,
        wordlength_bits: p.wordlength_bits,
        burst_length: p.burst_length,
        cost_model: p.cost_model.clone(),
    };
    toml::to_string(&f).expect("platform serialisation cannot fail")
}

/// Split of a layer chain into contiguous subgraphs plus the input-map tile
/// size of every convolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partitioning {
    /// Index of the first layer of every subgraph but the first, strictly
    /// increasing in `1..layers.len()`.
    pub cut_points: Vec<usize>,
    /// One entry per layer: the number of input maps a convolution processes
    /// per pass (`f_in`, a divisor of `n_in`). Always 1 for other layers.
    pub input_folds: Vec<u32>,
}

impl Partitioning {
    pub fn num_subgraphs(&self) -> usize {
        self.cut_points.len() + 1
    }

    pub fn ranges(&self, num_layers: usize) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.cut_points.len() + 1);
        let mut start = 0;
        for &c in &self.cut_points {
            out.push(start..c);
            start = c;
        }
        out.push(start..num_layers);
        out
    }

    pub fn validate(&self, net: &NetworkSpec) -> Result<()> {
        let n = net.layers.len();
        if self.input_folds.len() != n {
            return Err(Error::Validation(format!(
                "partitioning has {} input folds for {} layers",
                self.input_folds.len(),
                n
            )));
        }
        let mut prev = 0;
        for &c in &self.cut_points {
            if c <= prev || c >= n {
                return Err(Error::Validation(format!("invalid cut points {:?}", self.cut_points)));
            }
            prev = c;
        }
        for (j, r) in self.ranges(n).into_iter().enumerate() {
            if !net.layers[r].iter().any(|l| l.kind == LayerKind::Conv) {
                return Err(Error::Validation(format!("subgraph {j} contains no Conv layer")));
            }
        }
        for (i, (l, &f)) in net.layers.iter().zip(&self.input_folds).enumerate() {
            let ok = match l.kind {
                LayerKind::Conv => f >= 1 && l.n_in % f == 0,
                _ => f == 1,
            };
            if !ok {
                return Err(Error::Validation(format!(
                    "layer {}: input fold {f} is not a divisor of n_in = {}",
                    i + 1,
                    l.n_in
                )));
            }
        }
        Ok(())
    }
}

/// Every legal partitioning with at most `max_subgraphs` subgraphs: boundary
/// subsets whose ranges each hold a convolution, crossed with all divisor
/// choices of `f_in`. Ordered by boundary bitmask, then by fold vector.
pub fn enumerate_partitionings(net: &NetworkSpec, max_subgraphs: usize) -> Vec<Partitioning> {
    let n = net.layers.len();
    if n == 0 || max_subgraphs == 0 {
        return Vec::new();
    }
    let fold_choices: Vec<Vec<u32>> = net
        .layers
        .iter()
        .map(|l| match l.kind {
            LayerKind::Conv => divisors(l.n_in),
            _ => vec![1],
        })
        .collect();
    let folds = cartesian(&fold_choices);

    let boundaries = n - 1;
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << boundaries) {
        if mask.count_ones() as usize + 1 > max_subgraphs {
            continue;
        }
        let cut_points: Vec<usize> = (0..boundaries).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).collect();
        let part = Partitioning { cut_points, input_folds: vec![1; n] };
        let all_have_conv = part
            .ranges(n)
            .into_iter()
            .all(|r| net.layers[r].iter().any(|l| l.kind == LayerKind::Conv));
        if !all_have_conv {
            continue;
        }
        for f in &folds {
            out.push(Partitioning { cut_points: part.cut_points.clone(), input_folds: f.clone() });
        }
    }
    out
}

pub(crate) fn cartesian(choices: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut acc: Vec<Vec<u32>> = vec![Vec::new()];
    for c in choices {
        let mut next = Vec::with_capacity(acc.len() * c.len());
        for prefix in &acc {
            for &v in c {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        acc = next;
    }
    acc
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    const TWO_LAYER: &str = r#"
name = "tiny"
fps_target = 30.0

[[layers]]
kind = "conv"
n_in = 3
n_out = 16
k = 3
stride = 1
h_out = 32
w_out = 32

[[layers]]
kind = "pool"
n_in = 16
n_out = 16
k = 2
stride = 2
h_out = 16
w_out = 16
"#;

    pub(crate) fn layer(kind: LayerKind, n_in: u32, n_out: u32, k: u32) -> LayerSpec {
        LayerSpec { kind, n_in, n_out, k, stride: 1, h_out: 8, w_out: 8 }
    }

    #[test]
    fn parses_two_layer_doc() {
        let net = parse_network(TWO_LAYER).unwrap();
        assert_eq!(net.name, "tiny");
        assert_eq!(net.fps_target, Some(30.0));
        assert_eq!(net.layers.len(), 2);
        assert_eq!(net.layers[0].weight_count(), 432);
        assert_eq!(net.layers[1].weight_count(), 0);
    }

    #[test]
    fn chain_mismatch_names_both_layers() {
        let doc = TWO_LAYER.replacen("n_in = 16", "n_in = 8", 1);
        let err = parse_network(&doc).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Validation(_)), "{msg}");
        assert!(msg.contains("layer 2") && msg.contains("layer 1"), "{msg}");
    }

    #[test]
    fn empty_layer_list_is_rejected() {
        let err = parse_network("name = \"empty\"\n").unwrap_err();
        assert!(err.to_string().contains("at least one Conv layer"), "{err}");
    }

    #[test]
    fn malformed_doc_reports_field_and_line() {
        let doc = TWO_LAYER.replacen("k = 3", "k = \"three\"", 1);
        let err = parse_network(&doc).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse(_)));
        assert!(msg.contains("line"), "{msg}");
        assert!(msg.contains('k'), "{msg}");
    }

    #[test]
    fn unknown_keys_are_errors() {
        let doc = TWO_LAYER.replacen("stride = 1", "stride = 1\npadding = 1", 1);
        assert!(matches!(parse_network(&doc), Err(Error::Parse(_))));
        let doc = format!("colour = \"red\"\n{TWO_LAYER}");
        assert!(matches!(parse_network(&doc), Err(Error::Parse(_))));
    }

    #[test]
    fn nonlin_must_preserve_maps() {
        let l = LayerSpec { kind: LayerKind::Nonlin, n_in: 4, n_out: 5, k: 1, stride: 1, h_out: 2, w_out: 2 };
        let c = layer(LayerKind::Conv, 1, 4, 3);
        assert!(NetworkSpec::new("x", vec![c, l], None).is_err());
    }

    #[test]
    fn single_range_partitionings() {
        let net = NetworkSpec::new("cp", vec![layer(LayerKind::Conv, 6, 4, 3), layer(LayerKind::Pool, 4, 4, 2)], None)
            .unwrap();
        let parts = enumerate_partitionings(&net, 1);
        // cut after the pool would leave a conv-less range anyway; with one
        // subgraph only the fold choices of n_in = 6 remain.
        assert_eq!(parts.len(), 4);
        assert!(parts.iter().all(|p| p.cut_points.is_empty()));
        let folds: Vec<u32> = parts.iter().map(|p| p.input_folds[0]).collect();
        assert_eq!(folds, vec![1, 2, 3, 6]);
    }

    #[test]
    fn two_prime_convs_give_eight() {
        let net = NetworkSpec::new("cc", vec![layer(LayerKind::Conv, 5, 7, 3), layer(LayerKind::Conv, 7, 2, 3)], None)
            .unwrap();
        assert_eq!(enumerate_partitionings(&net, 2).len(), 8);
    }

    #[test]
    fn pool_first_cut_is_rejected() {
        let net = NetworkSpec::new("pc", vec![layer(LayerKind::Pool, 4, 4, 2), layer(LayerKind::Conv, 4, 4, 3)], None)
            .unwrap();
        let parts = enumerate_partitionings(&net, 2);
        assert!(parts.iter().all(|p| p.cut_points.is_empty()));
        assert_eq!(parts.len(), 3);
    }

    #[test]
    fn platform_roundtrip_and_validation() {
        let text = r#"
lut = 218600
ff = 437200
dsp = 900
bram = 1090
b_mem_bytes_per_s = 4.2e9
clock_hz = 150e6
port_width_bits = 64
wordlength_bits = 16
burst_length = 1024
"#;
        let p = parse_platform(text).unwrap();
        assert_eq!(p.pack_factor(), 4);
        assert_eq!(parse_platform(&platform_to_string(&p)).unwrap(), p);
        let bad = text.replace("wordlength_bits = 16", "wordlength_bits = 24");
        assert!(matches!(parse_platform(&bad), Err(Error::Validation(_))));
        let unknown = format!("{text}\nvoltage = 1.0\n");
        assert!(matches!(parse_platform(&unknown), Err(Error::Parse(_))));
    }
}
