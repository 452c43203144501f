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

//! Run manifest: everything a `dse` run depends on.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mcnn_core::model::{parse_network, parse_platform, NetworkSpec, PlatformSpec, DEFAULT_MAX_SUBGRAPHS};
use mcnn_core::optimizer::{ObjectiveKind, SchedulerKind};
use mcnn_core::sched::EXACT_TASK_LIMIT;
use serde::{Deserialize, Serialize};

use crate::artifacts::read_text;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub networks: Vec<PathBuf>,
    pub platform: PathBuf,
    pub objective: ObjectiveKind,
    /// Frame-rate targets by network name; they override the network files.
    #[serde(default)]
    pub fps_targets: BTreeMap<String, f64>,
    pub out: PathBuf,
    #[serde(default)]
    pub knobs: Knobs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    pub max_subgraphs: usize,
    pub max_n_pe: Option<u32>,
    pub max_n_op: Option<u32>,
    /// Front points per network taken into the joint set, lowest latency first.
    pub joint_cap: Option<usize>,
    pub ps_step: f64,
    /// Largest per-network repetition count searched; 1 runs every network once per cycle.
    pub max_rep: u32,
    pub scheduler: SchedulerKind,
    pub quantum_s: Option<f64>,
    /// Largest task count handed to the exact scheduler.
    pub exact_task_limit: usize,
    pub seed: u64,
    pub frames: u32,
    pub trace: bool,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            max_subgraphs: DEFAULT_MAX_SUBGRAPHS,
            max_n_pe: None,
            max_n_op: None,
            joint_cap: None,
            ps_step: 0.1,
            max_rep: 1,
            scheduler: SchedulerKind::Rcls,
            quantum_s: None,
            exact_task_limit: EXACT_TASK_LIMIT,
            seed: 0,
            frames: 8,
            trace: false,
        }
    }
}

/// Parses `NAME=VALUE` frame-rate targets.
pub fn parse_fps_targets(items: &[String]) -> CliResult<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in items {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("fps target '{item}' is not of the form NAME=VALUE")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("fps target '{item}' has a non-numeric value")))?;
        if out.insert(name.trim().to_string(), v).is_some() {
            return Err(CliError::Input(format!("fps target for '{}' given twice", name.trim())));
        }
    }
    Ok(out)
}

impl RunManifest {
    /// Loads a TOML manifest; relative paths are taken from its directory.
    pub fn load(path: &Path) -> CliResult<RunManifest> {
        let text = read_text(path, "manifest")?;
        let mut m: RunManifest =
            toml::from_str(&text).map_err(|e| CliError::Input(format!("malformed manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        m.networks.iter_mut().for_each(rebase);
        rebase(&mut m.platform);
        rebase(&mut m.out);
        Ok(m)
    }

    pub fn validate(&self) -> CliResult<()> {
        let k = &self.knobs;
        if self.networks.is_empty() {
            return Err(CliError::Input("at least one network file is required".into()));
        }
        if k.max_subgraphs == 0 || k.max_rep == 0 || k.frames == 0 || k.joint_cap == Some(0) {
            return Err(CliError::Input("max_subgraphs, max_rep, frames and joint_cap must be at least 1".into()));
        }
        if !(k.ps_step > 0.0 && k.ps_step <= 1.0) {
            return Err(CliError::Input(format!("ps_step must lie in (0, 1], got {}", k.ps_step)));
        }
        if k.exact_task_limit > EXACT_TASK_LIMIT {
            return Err(CliError::Input(format!("exact_task_limit cannot exceed {EXACT_TASK_LIMIT}")));
        }
        Ok(())
    }

    /// Reads the network and platform files and applies the fps targets.
    pub fn load_inputs(&self) -> CliResult<(Vec<NetworkSpec>, PlatformSpec)> {
        self.validate()?;
        let platform = parse_platform(&read_text(&self.platform, "platform")?)?;
        let mut nets = Vec::with_capacity(self.networks.len());
        for path in &self.networks {
            let net = parse_network(&read_text(path, "network")?)?;
            if nets.iter().any(|n: &NetworkSpec| n.name == net.name) {
                return Err(CliError::Input(format!("network name '{}' appears twice", net.name)));
            }
            nets.push(net);
        }
        for (name, &fps) in &self.fps_targets {
            let net = nets
                .iter_mut()
                .find(|n| &n.name == name)
                .ok_or_else(|| CliError::Input(format!("fps target names unknown network '{name}'")))?;
            if !(fps.is_finite() && fps > 0.0) {
                return Err(CliError::Input(format!("fps target of '{name}' must be positive")));
            }
            net.fps_target = Some(fps);
        }
        Ok((nets, platform))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fps_targets_parse() {
        let t = parse_fps_targets(&["lenet=30".into(), " vgg = 4.5".into()]).unwrap();
        assert_eq!(t.get("lenet"), Some(&30.0));
        assert_eq!(t.get("vgg"), Some(&4.5));
        assert!(parse_fps_targets(&["lenet".into()]).is_err());
        assert!(parse_fps_targets(&["lenet=fast".into()]).is_err());
        assert!(parse_fps_targets(&["a=1".into(), "a=2".into()]).is_err());
    }

    #[test]
    fn manifest_paths_resolve_against_its_directory() {
        let dir = std::env::temp_dir().join(format!("mcnn-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(
            &path,
            "networks = [\"a.toml\", \"/abs/b.toml\"]\nplatform = \"p.toml\"\nobjective = \"maxthrpt\"\nout = \"out\"\n[knobs]\nmax_rep = 3\n",
        )
        .unwrap();
        let m = RunManifest::load(&path).unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
        assert_eq!(m.networks, vec![dir.join("a.toml"), PathBuf::from("/abs/b.toml")]);
        assert_eq!((m.platform, m.out), (dir.join("p.toml"), dir.join("out")));
        assert_eq!(m.objective, ObjectiveKind::MaxThrpt);
        assert_eq!(m.knobs.max_rep, 3);
        assert_eq!(m.knobs.frames, Knobs::default().frames);
    }

    #[test]
    fn knob_bounds() {
        let mut m = RunManifest {
            networks: vec!["a.toml".into()],
            platform: "p.toml".into(),
            objective: ObjectiveKind::Fps,
            fps_targets: BTreeMap::new(),
            out: "out".into(),
            knobs: Knobs::default(),
        };
        assert!(m.validate().is_ok());
        m.knobs.ps_step = 0.0;
        assert!(m.validate().is_err());
        m.knobs.ps_step = 0.1;
        m.knobs.exact_task_limit = EXACT_TASK_LIMIT + 1;
        assert!(m.validate().is_err());
    }
}
