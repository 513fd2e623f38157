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

//! TOML experiment configuration. See `configs/README.md` for the schema.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::equilibrium::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::estimator::EstimateOptions;
use crate::game::{contraction_margin, GameSpec, GameVariant, ParameterBox, StrategySet};
use crate::graphon::{matrix_from_rows, read_grid_csv, Graphon};

pub const DEFAULT_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl From<crate::error::Error> for ConfigError {
    fn from(e: crate::error::Error) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub graphon: GraphonSection,
    pub game: GameSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphonSection {
    Constant {
        value: f64,
    },
    Sbm {
        q: Vec<Vec<f64>>,
        pi: Vec<f64>,
    },
    /// `path` is resolved relative to the config file.
    Grid {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSection {
    LqHomogeneous {
        strategy_set: [f64; 2],
        xi_lower: Vec<f64>,
        xi_upper: Vec<f64>,
    },
    LqSbm {
        theta1: f64,
        strategy_set: [f64; 2],
        xi_lower: Vec<f64>,
        xi_upper: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub eta_true: Vec<f64>,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_runs")]
    pub runs_per_n: usize,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
}

fn default_n_list() -> Vec<usize> {
    vec![100, 400, 1600]
}

fn default_runs() -> usize {
    20
}

fn default_quantiles() -> Vec<f64> {
    DEFAULT_QUANTILES.to_vec()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub starts: Option<usize>,
    pub armijo: Option<f64>,
    pub shrink: Option<f64>,
    pub initial_step: Option<f64>,
    pub gtol: Option<f64>,
    pub max_iter: Option<usize>,
    pub margin_buffer: Option<f64>,
}

/// Validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub graphon: Graphon,
    pub spec: GameSpec,
    pub eta_true: Vec<f64>,
    pub n_list: Vec<usize>,
    pub runs_per_n: usize,
    pub master_seed: u64,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub estimate: EstimateOptions,
    pub output: Option<PathBuf>,
    pub quantiles: Vec<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses a config; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        Self::from_file(file, base_dir)
    }

    pub fn from_file(file: ConfigFile, base_dir: &Path) -> Result<Self, ConfigError> {
        let graphon = match &file.graphon {
            GraphonSection::Constant { value } => Graphon::constant(*value)?,
            GraphonSection::Sbm { q, pi } => Graphon::sbm(matrix_from_rows(q)?, pi.clone())?,
            GraphonSection::Grid { path } => {
                let full = base_dir.join(path);
                let f = fs::File::open(&full).map_err(|source| ConfigError::Io {
                    path: full.clone(),
                    source,
                })?;
                read_grid_csv(std::io::BufReader::new(f)).map_err(ConfigError::Invalid)?
            }
        };
        let (variant, set, lo, hi) = match &file.game {
            GameSection::LqHomogeneous {
                strategy_set,
                xi_lower,
                xi_upper,
            } => (GameVariant::LqHomogeneous, strategy_set, xi_lower, xi_upper),
            GameSection::LqSbm {
                theta1,
                strategy_set,
                xi_lower,
                xi_upper,
            } => (GameVariant::LqSbm { theta1: *theta1 }, strategy_set, xi_lower, xi_upper),
        };
        let spec = GameSpec::new(
            variant,
            StrategySet::new(set[0], set[1])?,
            ParameterBox::new(lo.clone(), hi.clone())?,
        )?;
        spec.check_graphon(&graphon)?;

        let exp = &file.experiment;
        if !spec.xi.contains_interior(&exp.eta_true) {
            return Err(ConfigError::Invalid(format!(
                "eta_true {:?} must lie in the interior of the parameter box",
                exp.eta_true
            )));
        }
        let margin = contraction_margin(&spec, &graphon)?;
        if !(margin > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "contraction margin over the parameter box is {margin}; the equilibrium is not unique everywhere"
            )));
        }
        if let Some(n) = exp.n_list.iter().find(|&&n| n == 0) {
            return Err(ConfigError::Invalid(format!("network size {n} in n_list")));
        }
        if let Some(q) = exp.quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(ConfigError::Invalid(format!("quantile {q} outside [0, 1]")));
        }

        let defaults = EstimateOptions::default();
        let o = &file.optimizer;
        let estimate = EstimateOptions {
            starts: o.starts.unwrap_or(defaults.starts),
            armijo: o.armijo.unwrap_or(defaults.armijo),
            shrink: o.shrink.unwrap_or(defaults.shrink),
            initial_step: o.initial_step.unwrap_or(defaults.initial_step),
            gtol: o.gtol.unwrap_or(defaults.gtol),
            max_iter: o.max_iter.unwrap_or(defaults.max_iter),
            margin_buffer: o.margin_buffer.unwrap_or(defaults.margin_buffer),
            ..defaults
        };
        if !(estimate.shrink > 0.0 && estimate.shrink < 1.0) || !(estimate.armijo > 0.0 && estimate.armijo < 1.0) {
            return Err(ConfigError::Invalid("optimizer armijo and shrink must lie in (0, 1)".into()));
        }
        Ok(Self {
            graphon,
            spec,
            eta_true: exp.eta_true.clone(),
            n_list: exp.n_list.clone(),
            runs_per_n: exp.runs_per_n,
            master_seed: exp.master_seed,
            solver_tol: file.solver.tol.unwrap_or(DEFAULT_TOL),
            solver_max_iter: file.solver.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            estimate,
            output: exp.output.clone(),
            quantiles: exp.quantiles.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[graphon]
type = "sbm"
q = [[0.8, 0.2], [0.2, 0.4]]
pi = [0.5, 0.5]

[game]
type = "lq_sbm"
theta1 = 1.0
strategy_set = [0.0, 10.0]
xi_lower = [0.01, 0.01]
xi_upper = [1.2, 1.2]

[experiment]
eta_true = [0.5, 0.7]
master_seed = 1
"#;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_toml(text, Path::new("."))
    }

    #[test]
    fn defaults_are_filled_in() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.n_list, vec![100, 400, 1600]);
        assert_eq!(c.runs_per_n, 20);
        assert_eq!(c.quantiles, DEFAULT_QUANTILES.to_vec());
        assert_eq!(c.solver_tol, DEFAULT_TOL);
        assert_eq!(c.estimate, EstimateOptions::default());
        assert!(c.output.is_none());
    }

    #[test]
    fn overrides_apply() {
        let text = format!("{BASE}\n[solver]\ntol = 1e-12\n\n[optimizer]\nstarts = 3\ngtol = 1e-8\n");
        let c = parse(&text).unwrap();
        assert_eq!(c.solver_tol, 1e-12);
        assert_eq!(c.estimate.starts, 3);
        assert_eq!(c.estimate.gtol, 1e-8);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cases = [
            BASE.replace("eta_true = [0.5, 0.7]", "eta_true = [0.01, 0.7]"),
            BASE.replace("xi_upper = [1.2, 1.2]", "xi_upper = [3.0, 3.0]"),
            BASE.replace("master_seed = 1", "master_seed = 1\nn_list = [0, 10]"),
            BASE.replace("master_seed = 1", "master_seed = 1\nquantiles = [1.5]"),
            BASE.replace("[0.2, 0.4]]", "[0.3, 0.4]]"),
            BASE.replace("master_seed = 1", "master_seed = 1\nbogus = 2"),
            BASE.replace("type = \"lq_sbm\"", "type = \"lq_homogeneous\""),
            format!("{BASE}\n[optimizer]\nshrink = 1.5\n"),
        ];
        for text in cases {
            assert!(parse(&text).is_err(), "accepted:\n{text}");
        }
    }

    #[test]
    fn grid_path_is_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("w.csv"), "0.5,0.2\n0.2,0.5\n").unwrap();
        let text = r#"
[graphon]
type = "grid"
path = "w.csv"

[game]
type = "lq_homogeneous"
strategy_set = [0.0, 10.0]
xi_lower = [0.0, 0.0]
xi_upper = [1.0, 1.0]

[experiment]
eta_true = [0.5, 0.5]
master_seed = 3
"#;
        let path = dir.path().join("c.toml");
        std::fs::write(&path, text).unwrap();
        let c = ExperimentConfig::load(&path).unwrap();
        assert_eq!(c.graphon.num_cells(), 2);
        assert!(matches!(
            ExperimentConfig::load(&dir.path().join("missing.toml")),
            Err(ConfigError::Io { .. })
        ));
    }
}
