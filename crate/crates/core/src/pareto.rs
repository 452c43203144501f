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

//! Per-network design points, their latency/resource Pareto fronts, and the
//! feasible combinations of front points across networks.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::model::{enumerate_partitionings, LayerKind, NetworkSpec, PlatformSpec, DEFAULT_MAX_SUBGRAPHS};
use crate::sdf::{engine_metrics, resource_usage, total_time, EngineConfig, ResourceVector, StageConfig, SubgraphMetrics};
use crate::util::divisors;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignPoint {
    pub engine: EngineConfig,
    pub metrics: Vec<SubgraphMetrics>,
    pub rsc: ResourceVector,
    /// Batch-1 end-to-end time with the whole memory bandwidth available.
    pub latency_s: f64,
}

impl DesignPoint {
    pub fn evaluate(net: &NetworkSpec, engine: EngineConfig, platform: &PlatformSpec) -> Result<DesignPoint> {
        engine.validate(net)?;
        let metrics = engine_metrics(net, &engine, platform)?;
        let rsc = resource_usage(net, &engine, platform);
        let latency_s = total_time(net, &engine, 1, platform, platform.b_mem)?;
        Ok(DesignPoint { engine, metrics, rsc, latency_s })
    }

    fn objective(&self) -> [f64; 5] {
        [
            self.latency_s,
            self.rsc.lut as f64,
            self.rsc.ff as f64,
            self.rsc.dsp as f64,
            self.rsc.bram as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDesignPoint {
    /// Position of each chosen point in its network's front.
    pub front_indices: Vec<usize>,
    pub points: Vec<DesignPoint>,
}

impl JointDesignPoint {
    pub fn total_rsc(&self) -> ResourceVector {
        self.points.iter().map(|p| p.rsc).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointLimits {
    pub max_subgraphs: usize,
    pub max_n_pe: Option<u32>,
    pub max_n_op: Option<u32>,
    /// Upper bound on the number of engine configurations evaluated.
    pub max_lattice: usize,
}

impl Default for PointLimits {
    fn default() -> Self {
        PointLimits { max_subgraphs: DEFAULT_MAX_SUBGRAPHS, max_n_pe: None, max_n_op: None, max_lattice: 2_000_000 }
    }
}

fn capped(values: Vec<u32>, cap: Option<u32>) -> Vec<u32> {
    match cap {
        Some(c) => values.into_iter().filter(|&v| v <= c).collect(),
        None => values,
    }
}

/// Walks the fold lattice: every partitioning crossed with divisor-valued
/// `n_pe` and `n_op` per stage. Points that do not fit the device are dropped.
pub fn enumerate_points(net: &NetworkSpec, platform: &PlatformSpec, limits: &PointLimits) -> Result<Vec<DesignPoint>> {
    let per_layer: Vec<Vec<(u32, u32)>> = net
        .layers
        .iter()
        .map(|l| {
            let pes = capped(divisors(l.n_out), limits.max_n_pe);
            let ops = match l.kind {
                LayerKind::Nonlin => vec![1],
                _ => capped(divisors(l.k * l.k), limits.max_n_op),
            };
            pes.iter().flat_map(|&p| ops.iter().map(move |&o| (p, o))).collect()
        })
        .collect();
    let partitionings = enumerate_partitionings(net, limits.max_subgraphs);
    let per_partitioning: usize = per_layer.iter().map(Vec::len).try_fold(1usize, |a, n| a.checked_mul(n)).unwrap_or(usize::MAX);
    let lattice = per_partitioning.saturating_mul(partitionings.len());
    if lattice > limits.max_lattice {
        return Err(Error::Config(format!(
            "network '{}' has {lattice} engine configurations, above the limit of {}",
            net.name, limits.max_lattice
        )));
    }

    let mut points = Vec::new();
    let mut choice = vec![0usize; per_layer.len()];
    for part in partitionings {
        if per_layer.iter().any(Vec::is_empty) {
            break;
        }
        choice.iter_mut().for_each(|c| *c = 0);
        loop {
            let stages: Vec<StageConfig> = net
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let (n_pe, n_op) = per_layer[i][choice[i]];
                    StageConfig { t: l.kind, n_pe, n_op, f_in: part.input_folds[i] }
                })
                .collect();
            let engine = EngineConfig { partitioning: part.clone(), stages };
            let rsc = resource_usage(net, &engine, platform);
            if rsc.fits_in(&platform.rsc_avail) {
                points.push(DesignPoint::evaluate(net, engine, platform)?);
            }
            if !advance(&mut choice, &per_layer) {
                break;
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Infeasible(format!("no feasible single-CNN design for network '{}'", net.name)));
    }
    Ok(points)
}

/// Odometer increment with the last position varying fastest.
fn advance<T>(choice: &mut [usize], options: &[Vec<T>]) -> bool {
    for i in (0..choice.len()).rev() {
        choice[i] += 1;
        if choice[i] < options[i].len() {
            return true;
        }
        choice[i] = 0;
    }
    false
}

fn dominates(a: &[f64; 5], b: &[f64; 5]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

fn lex_cmp(a: &[f64; 5], b: &[f64; 5]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Indices of the non-dominated objective vectors, in input order. A point can
/// only be dominated by one that sorts lexicographically before it, and by
/// transitivity it suffices to compare against the points already kept.
pub fn non_dominated(objectives: &[[f64; 5]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..objectives.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&objectives[a], &objectives[b]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if !kept.iter().any(|&k| dominates(&objectives[k], &objectives[i])) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

pub fn pareto_front(points: &[DesignPoint]) -> Vec<DesignPoint> {
    let obj: Vec<[f64; 5]> = points.iter().map(DesignPoint::objective).collect();
    non_dominated(&obj).into_iter().map(|i| points[i].clone()).collect()
}

/// Every combination of one front point per network that fits the device
/// together, ordered lexicographically by front index. With `cap`, only the
/// `cap` lowest-latency points of each front take part.
pub fn enumerate_joint(
    fronts: &[Vec<DesignPoint>],
    rsc_avail: &ResourceVector,
    cap: Option<usize>,
) -> Result<Vec<JointDesignPoint>> {
    if fronts.is_empty() || fronts.iter().any(Vec::is_empty) {
        return Err(Error::Validation("every network needs a nonempty front".into()));
    }
    let candidates: Vec<Vec<usize>> = fronts
        .iter()
        .map(|f| {
            let mut idx: Vec<usize> = (0..f.len()).collect();
            if let Some(m) = cap {
                idx.sort_by(|&a, &b| f[a].latency_s.total_cmp(&f[b].latency_s).then(a.cmp(&b)));
                idx.truncate(m.max(1));
                idx.sort_unstable();
            }
            idx
        })
        .collect();

    let mut joints = Vec::new();
    let mut choice = vec![0usize; fronts.len()];
    loop {
        let indices: Vec<usize> = choice.iter().zip(&candidates).map(|(&c, cand)| cand[c]).collect();
        let total: ResourceVector = indices.iter().zip(fronts).map(|(&i, f)| f[i].rsc).sum();
        if total.fits_in(rsc_avail) {
            let points = indices.iter().zip(fronts).map(|(&i, f)| f[i].clone()).collect();
            joints.push(JointDesignPoint { front_indices: indices, points });
        }
        if !advance(&mut choice, &candidates) {
            break;
        }
    }
    if joints.is_empty() {
        return Err(Error::Infeasible("no feasible joint design fits the device".into()));
    }
    Ok(joints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::layer;
    use crate::model::LayerKind::*;
    use crate::sdf::tests::platform;
    use proptest::prelude::*;

    fn brute_front(obj: &[[f64; 5]]) -> Vec<usize> {
        (0..obj.len()).filter(|&i| !(0..obj.len()).any(|j| dominates(&obj[j], &obj[i]))).collect()
    }

    fn fake(lat: f64, dsp: u64) -> DesignPoint {
        DesignPoint {
            engine: EngineConfig {
                partitioning: crate::model::Partitioning { cut_points: vec![], input_folds: vec![1] },
                stages: vec![],
            },
            metrics: vec![],
            rsc: ResourceVector { lut: 1, ff: 1, dsp, bram: 1 },
            latency_s: lat,
        }
    }

    #[test]
    fn tiny_conv_lattice() {
        let net = NetworkSpec::new("t", vec![layer(Conv, 4, 2, 1)], None).unwrap();
        let pts = enumerate_points(&net, &platform(), &PointLimits::default()).unwrap();
        let mut got: Vec<(u32, u32, u32)> =
            pts.iter().map(|p| (p.engine.stages[0].n_pe, p.engine.stages[0].n_op, p.engine.stages[0].f_in)).collect();
        got.sort_unstable();
        let mut want = Vec::new();
        for n_pe in 1..=2u32 {
            for f_in in (1..=4u32).filter(|d| 4 % d == 0) {
                want.push((n_pe, 1, f_in));
            }
        }
        assert_eq!(got, want);
        for p in &pts {
            assert_eq!(p.rsc, resource_usage(&net, &p.engine, &platform()));
            assert_eq!(p.latency_s, total_time(&net, &p.engine, 1, &platform(), platform().b_mem).unwrap());
        }
    }

    #[test]
    fn no_dsp_is_infeasible() {
        let net = NetworkSpec::new("t", vec![layer(Conv, 4, 2, 1)], None).unwrap();
        let mut p = platform();
        p.rsc_avail.dsp = 0;
        let err = enumerate_points(&net, &p, &PointLimits::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
        assert!(err.to_string().contains("no feasible single-CNN design"));
    }

    #[test]
    fn n_op_cap_respected() {
        let net = NetworkSpec::new("t", vec![layer(Conv, 2, 2, 3), layer(Pool, 2, 2, 2)], None).unwrap();
        let limits = PointLimits { max_n_op: Some(1), ..PointLimits::default() };
        let pts = enumerate_points(&net, &platform(), &limits).unwrap();
        assert!(pts.iter().all(|p| p.engine.stages.iter().all(|s| s.n_op == 1)));
    }

    #[test]
    fn lattice_guard() {
        let net = NetworkSpec::new("t", vec![layer(Conv, 2, 2, 3)], None).unwrap();
        let limits = PointLimits { max_lattice: 3, ..PointLimits::default() };
        assert!(matches!(enumerate_points(&net, &platform(), &limits), Err(Error::Config(_))));
    }

    #[test]
    fn strict_dominance_removes() {
        let f = pareto_front(&[fake(10.0, 5), fake(12.0, 6)]);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].latency_s, 10.0);
    }

    #[test]
    fn incomparable_both_kept() {
        assert_eq!(pareto_front(&[fake(10.0, 5), fake(8.0, 7)]).len(), 2);
    }

    #[test]
    fn duplicates_both_kept() {
        assert_eq!(pareto_front(&[fake(10.0, 5), fake(10.0, 5)]).len(), 2);
    }

    #[test]
    fn joint_product_bound() {
        let a: Vec<_> = (0..3).map(|i| fake(10.0 - i as f64, 10 + i)).collect();
        let b: Vec<_> = (0..4).map(|i| fake(10.0 - i as f64, 10 + i)).collect();
        let avail = ResourceVector { lut: 100, ff: 100, dsp: 24, bram: 100 };
        let j = enumerate_joint(&[a, b], &avail, None).unwrap();
        assert!(j.len() <= 12);
        assert!(j.iter().all(|x| x.total_rsc().fits_in(&avail)));
        assert_eq!(j.len(), 4 + 4 + 3);
    }

    #[test]
    fn each_at_sixty_percent_is_infeasible() {
        let avail = ResourceVector { lut: 100, ff: 100, dsp: 100, bram: 100 };
        let a = vec![fake(1.0, 60)];
        let err = enumerate_joint(&[a.clone(), a], &avail, None).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn cap_keeps_fastest() {
        let a: Vec<_> = (0..5).map(|i| fake(5.0 - i as f64, 1)).collect();
        let avail = ResourceVector { lut: 100, ff: 100, dsp: 100, bram: 100 };
        let j = enumerate_joint(&[a.clone(), a], &avail, Some(2)).unwrap();
        assert_eq!(j.len(), 4);
        assert!(j.iter().all(|x| x.front_indices.iter().all(|&i| i >= 3)));
    }

    fn obj_strategy(n: usize) -> impl Strategy<Value = Vec<[f64; 5]>> {
        prop::collection::vec(prop::array::uniform5(0u8..8).prop_map(|a| a.map(f64::from)), 1..n)
    }

    proptest! {
        #[test]
        fn front_matches_quadratic_filter(obj in obj_strategy(100)) {
            prop_assert_eq!(non_dominated(&obj), brute_front(&obj));
        }

        #[test]
        fn joint_matches_triple_loop(
            r in prop::collection::vec(prop::collection::vec((0u64..40, 0u64..40), 5), 3),
        ) {
            let fronts: Vec<Vec<DesignPoint>> = r.iter().map(|f| f.iter().map(|&(d, l)| {
                let mut p = fake(1.0, d);
                p.rsc.lut = l;
                p
            }).collect()).collect();
            let avail = ResourceVector { lut: 60, ff: 100, dsp: 60, bram: 100 };
            let mut want = Vec::new();
            for i in 0..5 { for j in 0..5 { for k in 0..5 {
                let dsp = r[0][i].0 + r[1][j].0 + r[2][k].0;
                let lut = r[0][i].1 + r[1][j].1 + r[2][k].1;
                if dsp <= 60 && lut <= 60 { want.push(vec![i, j, k]); }
            }}}
            match enumerate_joint(&fronts, &avail, None) {
                Ok(j) => prop_assert_eq!(j.into_iter().map(|x| x.front_indices).collect::<Vec<_>>(), want),
                Err(_) => prop_assert!(want.is_empty()),
            }
        }
    }
}
