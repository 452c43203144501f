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

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input document. The message carries the offending field and
    /// the line/column reported by the parser.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    /// The analytical model was asked something it cannot answer, e.g. a
    /// stage with a nonzero workload but a zero processing rate.
    #[error("model error: {0}")]
    Model(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("scheduling error: {0}")]
    Schedule(String),
    #[error("configuration error: {0}")]
    Config(String),
    /// An internal contract between pipeline stages was broken.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Input errors are the caller's fault; everything else is a property of
    /// the instance being solved.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Validation(_) | Error::Config(_))
    }
}
