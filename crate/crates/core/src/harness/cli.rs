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

//! `graphon-games` command line.
//!
//! Exit status: 0 on success, 1 on configuration or input errors, 2 on
//! numerical failures.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::{ConfigError, ExperimentConfig};
use super::experiment::{run_experiment, write_records_csv, RunOptions};
use super::format_float;
use super::quantiles::{summarize_quantiles, write_summary_csv};
use crate::diagnostics::{empirical_identifiability_test, homogeneous_identifiability, sbm_identifiability_constant};
use crate::equilibrium::PreparedGraphon;
use crate::estimator::LeastSquares;
use crate::functionspace::PiecewiseConstantFn;
use crate::game::{contraction_margin, GameVariant};
use crate::graphon::Graphon;
use crate::sampling::{observe, read_column, sample_network, solve_network_game};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "graphon-games",
    version,
    about = "Graphon game equilibria and payoff-parameter estimation"
)]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `experiment.master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (or file prefix for `sample`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the configuration, graphon and contraction condition.
    Validate,
    /// Print the graphon equilibrium at a parameter.
    Solve {
        /// Comma-separated parameter; defaults to `eta_true`.
        #[arg(long, value_delimiter = ',')]
        eta: Option<Vec<f64>>,
        /// Write the equilibrium as an observation file sampled at the
        /// midpoints of `M` uniform cells instead of as intervals.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Sample a network, solve its game at `eta_true`, and write
    /// `<out>.labels`, `<out>.edges` and `<out>.observation`.
    Sample {
        #[arg(long)]
        n: usize,
    },
    /// Estimate the parameter from an observation file or a freshly sampled network.
    Estimate {
        /// One strategy per line, agents in label order.
        #[arg(long, conflicts_with = "n")]
        observation: Option<PathBuf>,
        /// Sample a network of this size at `eta_true` and observe its equilibrium.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the Monte Carlo convergence experiment.
    Experiment {
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Record per-run wall time (output is then not reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// Identifiability report at `eta_true`.
    Diagnose {
        /// Random parameters for the empirical inequality check.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<crate::error::Error> for Failure {
    fn from(e: crate::error::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

/// Runs the CLI with `args` (including the program name), printing reports to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            EXIT_NUMERICAL
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn open_out(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|&x| format_float(x)).collect::<Vec<_>>().join(",")
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    let config = load(cli)?;
    match &cli.command {
        Command::Validate => validate(&config, stdout),
        Command::Solve { eta, grid } => solve(cli, &config, eta.as_deref(), *grid, stdout),
        Command::Sample { n } => sample(cli, &config, *n, stdout),
        Command::Estimate { observation, n } => estimate(&config, observation.as_deref(), *n, stdout),
        Command::Experiment { threads, timings } => experiment(cli, &config, *threads, *timings, stdout),
        Command::Diagnose { samples } => diagnose(&config, *samples, stdout),
    }
}

fn validate(config: &ExperimentConfig, out: &mut dyn Write) -> Result<(), Failure> {
    let g = &config.graphon;
    let lambda = g.lambda_max()?;
    let margin = contraction_margin(&config.spec, g)?;
    let eq = PreparedGraphon::new(g)?.solve(&config.spec, &config.eta_true)?;
    writeln!(out, "lambda_max = {}", format_float(lambda))?;
    writeln!(out, "sup_degree = {}", format_float(g.sup_degree()))?;
    writeln!(out, "contraction_margin = {}", format_float(margin))?;
    writeln!(out, "equilibrium_interior_at_eta_true = {}", eq.interior)?;
    if !eq.interior {
        return Err(Failure::Config("equilibrium at eta_true touches the strategy bounds".into()));
    }
    writeln!(out, "ok")?;
    Ok(())
}

fn solve(
    cli: &Cli,
    config: &ExperimentConfig,
    eta: Option<&[f64]>,
    grid: Option<usize>,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let eta = eta.unwrap_or(&config.eta_true);
    if eta.len() != config.spec.dim() {
        return Err(Failure::Config(format!(
            "parameter has {} entries, game expects {}",
            eta.len(),
            config.spec.dim()
        )));
    }
    let eq = PreparedGraphon::new(&config.graphon)?.solve(&config.spec, eta)?;
    let mut text = String::new();
    match grid {
        Some(0) => return Err(Failure::Config("--grid must be positive".into())),
        Some(m) => {
            for i in 0..m {
                let x = (i as f64 + 0.5) / m as f64;
                text.push_str(&format_float(eq.strategy.eval(x)));
                text.push('\n');
            }
        }
        None => {
            for (w, v) in eq.strategy.breakpoints().windows(2).zip(eq.strategy.values()) {
                text.push_str(&format!(
                    "{} {} {}\n",
                    format_float(w[0]),
                    format_float(w[1]),
                    format_float(*v)
                ));
            }
        }
    }
    match &cli.out {
        Some(path) => open_out(path)?.write_all(text.as_bytes())?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn sample(cli: &Cli, config: &ExperimentConfig, n: usize, stdout: &mut dyn Write) -> Result<(), Failure> {
    let prefix = cli.out.clone().unwrap_or_else(|| PathBuf::from("network"));
    let net = sample_network(&config.graphon, n, config.master_seed)?;
    let eq = solve_network_game(
        &net,
        &config.graphon,
        &config.spec,
        &config.eta_true,
        config.solver_tol,
        config.solver_max_iter,
    )?;
    net.write_labels(open_out(&with_suffix(&prefix, ".labels"))?)?;
    net.write_edge_list(open_out(&with_suffix(&prefix, ".edges"))?)?;
    let mut obs = open_out(&with_suffix(&prefix, ".observation"))?;
    for s in &eq.strategies {
        writeln!(obs, "{}", format_float(*s))?;
    }
    obs.flush()?;
    writeln!(stdout, "nodes = {}", net.len())?;
    writeln!(stdout, "edges = {}", net.edge_count())?;
    writeln!(stdout, "density = {}", format_float(net.density()))?;
    writeln!(stdout, "equilibrium_interior = {}", eq.interior)?;
    Ok(())
}

fn estimate(config: &ExperimentConfig, observation: Option<&Path>, n: Option<usize>, out: &mut dyn Write) -> Result<(), Failure> {
    let observed = match (observation, n) {
        (Some(path), _) => {
            let f = File::open(path)?;
            let values = read_column(BufReader::new(f)).map_err(Failure::Config)?;
            PiecewiseConstantFn::interpolate(&values).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        (None, Some(n)) => {
            let net = sample_network(&config.graphon, n, config.master_seed)?;
            let eq = solve_network_game(
                &net,
                &config.graphon,
                &config.spec,
                &config.eta_true,
                config.solver_tol,
                config.solver_max_iter,
            )?;
            observe(&net, &eq)?
        }
        (None, None) => return Err(Failure::Config("estimate needs --observation or --n".into())),
    };
    let ls = LeastSquares::new(&observed, &config.graphon, &config.spec)?;
    let est = ls.estimate(&config.estimate)?;
    writeln!(out, "eta_hat = {}", fmt_vec(&est.eta_hat))?;
    writeln!(out, "objective = {}", format_float(est.objective))?;
    writeln!(out, "gradient_norm = {}", format_float(est.gradient_norm))?;
    match est.hessian_min_eig {
        Some(h) => writeln!(out, "hessian_min_eig = {}", format_float(h))?,
        None => writeln!(out, "hessian_min_eig = unavailable")?,
    }
    writeln!(out, "starts = {}", est.starts)?;
    writeln!(out, "iterations = {}", est.iterations_total)?;
    writeln!(out, "converged = {}", est.converged)?;
    if !est.converged {
        return Err(Failure::Numerical("optimizer did not converge".into()));
    }
    Ok(())
}

fn experiment(
    cli: &Cli,
    config: &ExperimentConfig,
    threads: Option<usize>,
    timings: bool,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let path = cli
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("experiment.csv"));
    let records = run_experiment(config, &RunOptions { threads, timings })?;
    let mut w = open_out(&path)?;
    write_records_csv(&records, config.spec.dim(), &mut w)?;
    w.flush()?;
    writeln!(stdout, "runs = {}", records.len())?;
    writeln!(stdout, "written = {}", path.display())?;
    for r in records.iter().filter(|r| r.failure.is_some()) {
        writeln!(
            stdout,
            "failed N={} run={}: {}",
            r.n,
            r.run,
            r.failure.as_deref().unwrap_or("")
        )?;
    }
    if !records.is_empty() {
        let rows = summarize_quantiles(&records, &config.quantiles)?;
        let summary_path = path.with_extension("quantiles.csv");
        let mut w = open_out(&summary_path)?;
        write_summary_csv(&rows, &mut w)?;
        w.flush()?;
        writeln!(stdout, "summary = {}", summary_path.display())?;
    }
    Ok(())
}

fn diagnose(config: &ExperimentConfig, samples: usize, out: &mut dyn Write) -> Result<(), Failure> {
    let report = match (&config.spec.variant, &config.graphon) {
        (GameVariant::LqHomogeneous, g) => {
            homogeneous_identifiability(g, [config.eta_true[0], config.eta_true[1]], config.spec.strategy_set)?
        }
        (GameVariant::LqSbm { theta1 }, Graphon::Sbm { q, pi }) => {
            sbm_identifiability_constant(q, pi, *theta1, &config.eta_true)?
        }
        _ => unreachable!("config validation pairs block-model games with block-model graphons"),
    };
    writeln!(
        out,
        "{}",
        if report.identifiable {
            "identifiable"
        } else {
            "non-identifiable"
        }
    )?;
    if let Some(l) = report.constant {
        writeln!(out, "constant = {}", format_float(l))?;
        let test = empirical_identifiability_test(
            &config.graphon,
            &config.spec,
            &config.eta_true,
            l,
            samples,
            config.master_seed,
        )?;
        writeln!(out, "violations = {} / {}", test.violations, test.evaluated)?;
        writeln!(out, "max_ratio = {}", format_float(test.max_ratio))?;
    }
    if let Some(gamma) = report.gamma {
        writeln!(out, "gamma = {}", format_float(gamma))?;
        writeln!(out, "identifiable_combination = eta_1 + gamma * eta_2")?;
    }
    writeln!(
        out,
        "detail = {}",
        toml::to_string(&report.detail).unwrap_or_default().trim().replace('\n', "; ")
    )?;
    Ok(())
}
