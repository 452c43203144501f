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

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing user input.
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] mcnn_core::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("schedule violates the bandwidth budget\n{0}")]
    Unschedulable(String),
}

impl CliError {
    /// 0 success, 1 pipeline failure, 2 input error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(mcnn_core::Error::Parse("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(mcnn_core::Error::Infeasible("x".into())).exit_code(), 1);
        assert_eq!(CliError::Unschedulable("x".into()).exit_code(), 1);
    }
}
