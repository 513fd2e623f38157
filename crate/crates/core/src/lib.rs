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

//! Nash equilibria of graphon games and of networks sampled from graphons,
//! and least-squares estimation of payoff parameters from observed
//! equilibrium play.
//!
//! * [`functionspace`]: exact L² arithmetic on step functions.
//! * [`graphon`]: constant, block-model and grid graphons and their operator.
//! * [`game`]: linear-quadratic payoffs and the parameter-to-heterogeneity map.
//! * [`equilibrium`]: fixed-point and resolvent solvers with `η`-derivatives.
//! * [`sampling`]: W-random networks and their finite-game equilibria.
//! * [`estimator`]: the least-squares objective, its derivatives and minimizer.
//! * [`diagnostics`]: identifiability constants and derivative checks.
//! * [`harness`]: configuration, Monte Carlo experiments and the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod estimator;
pub mod functionspace;
pub mod game;
pub mod graphon;
pub mod harness;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
