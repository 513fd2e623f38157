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

//! Dominant eigenvalues of symmetric nonnegative operators.

use crate::error::{Error, Result};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 100_000;
/// Iterations without convergence after which the iteration restarts on the
/// shifted operator `A + shift I`.
const STALL_ITER: usize = 2_000;

/// Largest eigenvalue of a symmetric nonnegative operator given by `apply`
/// (`apply(v, out)` writes `A v` into `out`).
///
/// Starts from the normalized constant vector. If the plain iteration stalls
/// (e.g. `-λ_max` is also an eigenvalue) it restarts on `A + shift I`, where
/// `shift` must bound the spectral radius from above, so that `λ_max + shift`
/// is strictly dominant. Converged when `‖A v − ρ v‖ ≤ tol · |ρ|`.
pub fn power_iteration<F>(dim: usize, shift: f64, tol: f64, max_iter: usize, mut apply: F) -> Result<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if dim == 0 {
        return Ok(0.0);
    }
    let start = 1.0 / (dim as f64).sqrt();
    let mut v = vec![start; dim];
    let mut w = vec![0.0; dim];
    let mut sigma = 0.0;
    let mut since_restart = 0;
    for _ in 0..max_iter {
        apply(&v, &mut w);
        if sigma != 0.0 {
            w.iter_mut().zip(&v).for_each(|(wi, vi)| *wi += sigma * vi);
        }
        let rho: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let residual = w.iter().zip(&v).map(|(wi, vi)| (wi - rho * vi).powi(2)).sum::<f64>().sqrt();
        let lambda = rho - sigma;
        if residual <= tol * lambda.abs().max(f64::MIN_POSITIVE) {
            return Ok(lambda);
        }
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / norm);
        since_restart += 1;
        if sigma == 0.0 && since_restart >= STALL_ITER && shift > 0.0 {
            sigma = shift;
            v.fill(start);
            since_restart = 0;
        }
    }
    Err(Error::NoConvergence { iterations: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(a: &[Vec<f64>]) -> impl FnMut(&[f64], &mut [f64]) + '_ {
        move |v, out| {
            for (o, row) in out.iter_mut().zip(a) {
                *o = row.iter().zip(v).map(|(x, y)| x * y).sum();
            }
        }
    }

    #[test]
    fn diagonal_matrix() {
        let a = vec![vec![0.3, 0.0], vec![0.0, 0.7]];
        let l = power_iteration(2, 1.0, 1e-12, 100_000, dense(&a)).unwrap();
        assert!((l - 0.7).abs() < 1e-12);
    }

    #[test]
    fn bipartite_needs_shift() {
        // path graph: eigenvalues ±√2 and 0, the constant start overlaps both
        let b = vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]];
        let l = power_iteration(3, 2.0, 1e-12, 100_000, dense(&b)).unwrap();
        assert!((l - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn zero_operator() {
        let a = vec![vec![0.0; 3]; 3];
        assert_eq!(power_iteration(3, 0.0, 1e-10, 10, dense(&a)).unwrap(), 0.0);
    }

    #[test]
    fn cap_reports_no_convergence() {
        let b = vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]];
        let err = power_iteration(3, 0.0, 1e-12, 50, dense(&b)).unwrap_err();
        assert_eq!(err, Error::NoConvergence { iterations: 50 });
    }
}
