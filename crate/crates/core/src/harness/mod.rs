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

//! Configuration, Monte Carlo experiment driver, and the command-line tool.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod quantiles;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, write_records_csv, RunOptions, RunRecord};
pub use quantiles::{quantile, summarize_quantiles, write_summary_csv, SummaryRow};

/// Fixed output format for floats: 17 significant digits, scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}
