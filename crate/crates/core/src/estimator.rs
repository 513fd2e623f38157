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

//! Least-squares estimation of payoff parameters from an observed equilibrium.
//!
//! The estimate minimizes `J(η) = ‖s̄^[N] − s̄_η‖²_{L²}` over the parameter
//! box by projected gradient descent with Armijo backtracking from a
//! deterministic set of starting points.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::equilibrium::PreparedGraphon;
use crate::error::{Error, Result};
use crate::functionspace::{integrate_product, l2_distance, PiecewiseConstantFn};
use crate::game::GameSpec;
use crate::graphon::Graphon;

/// Objective values closer than this are ties, broken by the smaller `η̂`.
pub const OBJECTIVE_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    /// Number of low-discrepancy starts added to the box midpoint.
    pub starts: usize,
    pub armijo: f64,
    pub shrink: f64,
    pub initial_step: f64,
    /// Accepted steps are doubled for the next trial, up to this cap.
    pub max_step: f64,
    /// Stop when the projected-gradient norm falls below this.
    pub gtol: f64,
    pub max_iter: usize,
    /// Minimum contraction margin `1 − θ₂ λ_max` any iterate may have.
    pub margin_buffer: f64,
    pub parallel: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            armijo: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
            max_step: 1e6,
            gtol: 1e-9,
            max_iter: 5000,
            margin_buffer: 1e-6,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub eta_hat: Vec<f64>,
    pub objective: f64,
    /// Projected-gradient norm `‖η − P(η − ∇J)‖` at `η̂`.
    pub gradient_norm: f64,
    /// Smallest Hessian eigenvalue at `η̂`, absent when the equilibrium there
    /// is not interior.
    pub hessian_min_eig: Option<f64>,
    pub starts: usize,
    pub iterations_total: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hessian {
    pub matrix: DMatrix<f64>,
    /// `2 T₁`.
    pub t1_term: DMatrix<f64>,
    /// `2 T₂ᴺ`, subtracted from `2 T₁`.
    pub t2_term: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

/// Observation, graphon and game bundled for repeated objective evaluations.
#[derive(Debug, Clone)]
pub struct LeastSquares<'a> {
    observed: &'a PiecewiseConstantFn,
    prepared: PreparedGraphon,
    spec: &'a GameSpec,
}

impl<'a> LeastSquares<'a> {
    pub fn new(observed: &'a PiecewiseConstantFn, g: &Graphon, spec: &'a GameSpec) -> Result<Self> {
        spec.check_graphon(g)?;
        Ok(Self {
            observed,
            prepared: PreparedGraphon::new(g)?,
            spec,
        })
    }

    pub fn prepared(&self) -> &PreparedGraphon {
        &self.prepared
    }

    pub fn objective(&self, eta: &[f64]) -> Result<f64> {
        let eq = self.prepared.solve(self.spec, eta)?;
        Ok(l2_distance(self.observed, &eq.strategy).powi(2))
    }

    /// `J(η)` and `∇J(η) = −2 ∫ (s̄^[N] − s̄_η) ∇s̄_η`.
    pub fn objective_and_gradient(&self, eta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.prepared.solve_with_derivatives(self.spec, eta, false)?;
        let residual = self.observed - &d.strategy;
        let j = residual.l2_norm().powi(2);
        let grad = d.gradient.iter().map(|ds| -2.0 * integrate_product(&residual, ds)).collect();
        Ok((j, grad))
    }

    pub fn gradient(&self, eta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.objective_and_gradient(eta)?.1)
    }

    /// `H = 2 T₁ − 2 T₂ᴺ` with `T₁ = ∫ ∇s̄ ∇s̄ᵀ` and `T₂ᴺ = ∫ (s̄^[N] − s̄_η) ∇²s̄_η`.
    pub fn hessian(&self, eta: &[f64]) -> Result<Hessian> {
        let d = self.prepared.solve_with_derivatives(self.spec, eta, true)?;
        let second = d.second.expect("second derivatives requested");
        let residual = self.observed - &d.strategy;
        let n = d.gradient.len();
        let mut t1 = DMatrix::zeros(n, n);
        let mut t2 = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let a = 2.0 * integrate_product(&d.gradient[i], &d.gradient[j]);
                let b = 2.0 * integrate_product(&residual, &second[i][j]);
                t1[(i, j)] = a;
                t1[(j, i)] = a;
                t2[(i, j)] = b;
                t2[(j, i)] = b;
            }
        }
        let matrix = &t1 - &t2;
        let min_eigenvalue = SymmetricEigen::new(matrix.clone()).eigenvalues.min();
        Ok(Hessian {
            matrix,
            t1_term: t1,
            t2_term: t2,
            min_eigenvalue,
        })
    }

    /// Projection onto `Ξ` intersected with the contraction buffer.
    fn project(&self, eta: &[f64], cap: f64) -> Vec<f64> {
        let mut p = self.spec.xi.project(eta);
        match self.spec.variant {
            crate::game::GameVariant::LqHomogeneous => p[1] = p[1].min(cap),
            crate::game::GameVariant::LqSbm { .. } => p.iter_mut().for_each(|e| *e = e.min(cap)),
        }
        p
    }

    fn descend(&self, start: &[f64], opts: &EstimateOptions, cap: f64) -> Result<Descent> {
        let mut x = self.project(start, cap);
        let mut step = opts.initial_step;
        let mut iterations = 0;
        loop {
            let (j, g) = self.objective_and_gradient(&x)?;
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
            let pg = norm(&diff(&x, &self.project(&trial, cap)));
            if pg <= opts.gtol || iterations >= opts.max_iter {
                return Ok(Descent {
                    eta: x,
                    objective: j,
                    pg_norm: pg,
                    iterations,
                    converged: pg <= opts.gtol,
                });
            }
            let mut alpha = step;
            let accepted = loop {
                let cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
                let cand = self.project(&cand, cap);
                let d = diff(&cand, &x);
                if norm(&d) == 0.0 {
                    break None;
                }
                let predicted: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
                let j_new = self.objective(&cand)?;
                if j_new <= j + opts.armijo * predicted {
                    break Some(cand);
                }
                alpha *= opts.shrink;
            };
            iterations += 1;
            match accepted {
                Some(cand) => {
                    x = cand;
                    step = (2.0 * alpha).min(opts.max_step);
                }
                None => {
                    // no representable decrease left along the projected path
                    return Ok(Descent {
                        eta: x,
                        objective: j,
                        pg_norm: pg,
                        iterations,
                        converged: false,
                    });
                }
            }
        }
    }

    pub fn estimate(&self, opts: &EstimateOptions) -> Result<EstimationResult> {
        let xi = &self.spec.xi;
        if xi.dim() == 0 {
            return Err(Error::NoStart);
        }
        let lambda = self.prepared.lambda_max();
        for corner in xi.corners() {
            if !(self.spec.aggregate_coefficient(&corner) * lambda < 1.0) {
                return Err(Error::InfeasibleParameterSet { corner });
            }
        }
        let cap = if lambda > 0.0 {
            (1.0 - opts.margin_buffer) / lambda
        } else {
            f64::INFINITY
        };
        let starts = multistart_points(xi, opts.starts);
        let runs: Vec<Result<Descent>> = if opts.parallel {
            starts.par_iter().map(|s| self.descend(s, opts, cap)).collect()
        } else {
            starts.iter().map(|s| self.descend(s, opts, cap)).collect()
        };
        let iterations_total = runs.iter().flatten().map(|d| d.iterations).sum();
        let mut best: Option<Descent> = None;
        let mut first_error = None;
        for run in runs {
            match run {
                Ok(d) => {
                    if best.as_ref().is_none_or(|b| d.better_than(b)) {
                        best = Some(d);
                    }
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        let Some(best) = best else {
            return Err(first_error.unwrap_or(Error::NoStart));
        };
        let hessian_min_eig = self.hessian(&best.eta).ok().map(|h| h.min_eigenvalue);
        Ok(EstimationResult {
            eta_hat: best.eta,
            objective: best.objective,
            gradient_norm: best.pg_norm,
            hessian_min_eig,
            starts: starts.len(),
            iterations_total,
            converged: best.converged,
        })
    }
}

#[derive(Debug, Clone)]
struct Descent {
    eta: Vec<f64>,
    objective: f64,
    pg_norm: f64,
    iterations: usize,
    converged: bool,
}

impl Descent {
    fn better_than(&self, other: &Descent) -> bool {
        if (self.objective - other.objective).abs() <= OBJECTIVE_TIE_TOL {
            self.eta
                .iter()
                .zip(&other.eta)
                .find(|(a, b)| a != b)
                .is_some_and(|(a, b)| a < b)
        } else {
            self.objective < other.objective
        }
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Van der Corput radical inverse of `index` in base `base`.
fn radical_inverse(mut index: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

fn first_primes(n: usize) -> Vec<usize> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2;
    while primes.len() < n {
        if primes.iter().all(|p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

/// Box midpoint followed by the first `count` Halton points (indices `1..=count`).
pub fn multistart_points(xi: &crate::game::ParameterBox, count: usize) -> Vec<Vec<f64>> {
    let bases = first_primes(xi.dim());
    let mut points = vec![xi.midpoint()];
    for index in 1..=count {
        let u: Vec<f64> = bases.iter().map(|&b| radical_inverse(index, b)).collect();
        points.push(xi.at(&u));
    }
    points
}

pub fn objective(observed: &PiecewiseConstantFn, g: &Graphon, spec: &GameSpec, eta: &[f64]) -> Result<f64> {
    LeastSquares::new(observed, g, spec)?.objective(eta)
}

pub fn objective_gradient(observed: &PiecewiseConstantFn, g: &Graphon, spec: &GameSpec, eta: &[f64]) -> Result<Vec<f64>> {
    LeastSquares::new(observed, g, spec)?.gradient(eta)
}

pub fn hessian(observed: &PiecewiseConstantFn, g: &Graphon, spec: &GameSpec, eta: &[f64]) -> Result<Hessian> {
    LeastSquares::new(observed, g, spec)?.hessian(eta)
}

pub fn estimate(
    observed: &PiecewiseConstantFn,
    g: &Graphon,
    spec: &GameSpec,
    options: &EstimateOptions,
) -> Result<EstimationResult> {
    LeastSquares::new(observed, g, spec)?.estimate(options)
}
