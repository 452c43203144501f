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

//! Design-space exploration and bandwidth-aware scheduling for multiple CNN
//! engines sharing one FPGA and its external memory.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`model`] parses network/platform descriptions and enumerates partitionings,
//! * [`sdf`] evaluates the dataflow performance and resource model of an engine,
//! * [`pareto`] builds per-network Pareto fronts and feasible joint design points,
//! * [`sched`] solves the cyclic scheduling problem with slow-downs (list
//!   scheduling and an exact branch-and-bound),
//! * [`optimizer`] scores schedules and searches slow-downs for each joint point,
//! * [`hsched`] turns a schedule into the slot table of the hardware arbiter,
//! * [`sim`] replays a joint design point under either memory policy.

pub mod error;
pub mod hsched;
pub mod model;
pub mod optimizer;
pub mod pareto;
pub mod sched;
pub mod sdf;
pub mod sim;
mod util;

pub use error::{Error, Result};
