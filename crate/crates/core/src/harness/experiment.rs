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

//! The sample → solve → estimate Monte Carlo loop.
//!
//! Each `(N, run)` pair is an independent task seeded with
//! [`run_seed`]`(master_seed, run, N)`, so results do not depend on how
//! tasks are scheduled across threads. Records are returned sorted by `N`
//! (in `n_list` order) and then by run index.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::format_float;
use crate::equilibrium::PreparedGraphon;
use crate::error::Result;
use crate::estimator::LeastSquares;
use crate::functionspace::{l2_distance, PiecewiseConstantFn};
use crate::sampling::{observe, run_seed, sample_network, solve_network_game};

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub n: usize,
    pub run: usize,
    pub seed: u64,
    pub eta_hat: Vec<f64>,
    pub err_inf: f64,
    pub err_2: f64,
    pub objective: f64,
    /// `‖s̄^[N] − s̄_η̄‖_{L²}`.
    pub l2_obs_vs_graphon: f64,
    pub hessian_min_eig: f64,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Set when the run failed; numeric fields are then NaN.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Record wall-clock time per run. Off by default so that output is
    /// byte-for-byte reproducible.
    pub timings: bool,
}

pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<Vec<RunRecord>> {
    let prepared = PreparedGraphon::new(&config.graphon)?;
    let truth = prepared.solve(&config.spec, &config.eta_true)?.strategy;
    let tasks: Vec<(usize, usize)> = config
        .n_list
        .iter()
        .flat_map(|&n| (0..config.runs_per_n).map(move |run| (n, run)))
        .collect();
    let run_all = || -> Vec<RunRecord> {
        tasks
            .par_iter()
            .map(|&(n, run)| single_run(config, &truth, n, run, options.timings))
            .collect()
    };
    Ok(match options.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| crate::error::Error::InvalidGame(format!("thread pool: {e}")))?
            .install(run_all),
        None => run_all(),
    })
}

fn single_run(config: &ExperimentConfig, truth: &PiecewiseConstantFn, n: usize, run: usize, timings: bool) -> RunRecord {
    let seed = run_seed(config.master_seed, run as u64, n as u64);
    let start = Instant::now();
    let outcome = (|| -> Result<_> {
        let net = sample_network(&config.graphon, n, seed)?;
        let eq = solve_network_game(
            &net,
            &config.graphon,
            &config.spec,
            &config.eta_true,
            config.solver_tol,
            config.solver_max_iter,
        )?;
        let observed = observe(&net, &eq)?;
        let l2 = l2_distance(&observed, truth);
        // runs are already spread over threads
        let opts = crate::estimator::EstimateOptions {
            parallel: false,
            ..config.estimate.clone()
        };
        let est = LeastSquares::new(&observed, &config.graphon, &config.spec)?.estimate(&opts)?;
        Ok((l2, est))
    })();
    let wall_time_s = if timings { start.elapsed().as_secs_f64() } else { 0.0 };
    match outcome {
        Ok((l2, est)) => {
            let errs: Vec<f64> = est.eta_hat.iter().zip(&config.eta_true).map(|(a, b)| (a - b).abs()).collect();
            RunRecord {
                n,
                run,
                seed,
                err_inf: errs.iter().copied().fold(0.0, f64::max),
                err_2: errs.iter().map(|e| e * e).sum::<f64>().sqrt(),
                eta_hat: est.eta_hat,
                objective: est.objective,
                l2_obs_vs_graphon: l2,
                hessian_min_eig: est.hessian_min_eig.unwrap_or(f64::NAN),
                converged: est.converged,
                wall_time_s,
                failure: None,
            }
        }
        Err(e) => RunRecord {
            n,
            run,
            seed,
            eta_hat: vec![f64::NAN; config.eta_true.len()],
            err_inf: f64::NAN,
            err_2: f64::NAN,
            objective: f64::NAN,
            l2_obs_vs_graphon: f64::NAN,
            hessian_min_eig: f64::NAN,
            converged: false,
            wall_time_s,
            failure: Some(e.to_string()),
        },
    }
}

/// Column names of the run CSV for a parameter of dimension `dim`.
pub fn csv_header(dim: usize) -> String {
    let mut cols = vec!["N".to_string(), "run".into(), "seed".into()];
    cols.extend((1..=dim).map(|i| format!("eta_hat_{i}")));
    cols.extend(
        [
            "err_inf",
            "err_2",
            "objective",
            "l2_obs_vs_graphon",
            "hessian_min_eig",
            "converged",
            "wall_time_s",
        ]
        .map(String::from),
    );
    cols.join(",")
}

pub fn write_records_csv(records: &[RunRecord], dim: usize, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{}", csv_header(dim))?;
    for r in records {
        let mut fields = vec![r.n.to_string(), r.run.to_string(), r.seed.to_string()];
        fields.extend(r.eta_hat.iter().map(|&v| format_float(v)));
        fields.extend([r.err_inf, r.err_2, r.objective, r.l2_obs_vs_graphon, r.hessian_min_eig].map(format_float));
        fields.push(if r.converged { "1" } else { "0" }.to_string());
        fields.push(format_float(r.wall_time_s));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
