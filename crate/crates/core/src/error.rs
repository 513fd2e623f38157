// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed partition: {0}")]
    MalformedPartition(String),
    #[error("cannot interpolate an empty strategy vector")]
    EmptyVector,
    #[error("point ({x}, {y}) lies outside [0,1]^2")]
    OutOfDomain { x: f64, y: f64 },
    #[error("invalid graphon: {}", .0.join("; "))]
    InvalidGraphon(Vec<String>),
    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("invalid game specification: {0}")]
    InvalidGame(String),
    #[error("parameter {eta:?} lies outside the parameter box")]
    ParameterOutOfBox { eta: Vec<f64> },
    #[error("graphon is incompatible with the game: {0}")]
    IncompatibleGraphon(String),
    #[error("best-response map is not a contraction (margin {margin})")]
    NotAContraction { margin: f64 },
    #[error("spectral condition violated: aggregate effect {coefficient} times lambda_max {lambda_max} is not below 1")]
    SpectralConditionViolated { coefficient: f64, lambda_max: f64 },
    #[error("singular linear system")]
    SingularSystem,
    #[error("equilibrium is not interior to the strategy set")]
    NotInterior,
    #[error("parameter box violates the spectral condition at corner {corner:?}")]
    InfeasibleParameterSet { corner: Vec<f64> },
    #[error("parameter box is empty")]
    NoStart,
    #[error("community {community} has non-positive equilibrium aggregate {value}")]
    DegenerateAggregate { community: usize, value: f64 },
    #[error("empty group: {0}")]
    EmptyGroup(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}
