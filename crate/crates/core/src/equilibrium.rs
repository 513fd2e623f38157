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

//! Graphon Nash equilibria of linear-quadratic games.
//!
//! Every equilibrium lives on the graphon's natural partition, where `𝕎` is
//! the matrix `K = A diag(widths)`. Two independent routes compute it:
//!
//! * [`solve_fixed_point`] iterates the projected best response
//!   `s ← Π_S[θ₁ + θ₂ · K s]` from `s = 0`;
//! * the resolvent route solves `(I − diag(θ₂) K) s = θ₁` directly, which is
//!   the equilibrium whenever no projection binds.
//!
//! Derivatives with respect to `η` differentiate the resolvent identity. With
//! `V = I − diag(θ₂) K` and `θ` affine in `η`,
//!
//! ```text
//! ∂s/∂η_k       = V⁻¹ (∂θ₁/∂η_k + diag(∂θ₂/∂η_k) K s)
//! ∂²s/∂η_k∂η_l  = V⁻¹ (diag(∂θ₂/∂η_k) K ∂s/∂η_l + diag(∂θ₂/∂η_l) K ∂s/∂η_k)
//! ```
//!
//! which for the homogeneous game gives `(𝕀 − η₂𝕎)⁻¹𝟙`, `(𝕀 − η₂𝕎)⁻¹𝕎 s̄`, …
//! and for the block model `V⁻¹ E_ii QΔ_π s̄̄` and its symmetrized second order.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::functionspace::PiecewiseConstantFn;
use crate::game::{GameSpec, StrategySet};
use crate::graphon::Graphon;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphonEquilibrium {
    /// `s̄_η`.
    pub strategy: PiecewiseConstantFn,
    /// `z̄ = 𝕎 s̄_η`.
    pub aggregate: PiecewiseConstantFn,
    pub interior: bool,
    pub iterations: usize,
    /// `sup |s̄ − Π_S[θ₁ + θ₂ z̄]|`.
    pub residual: f64,
}

/// Community-level equilibrium of a block-model game.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEquilibrium {
    pub values: Vec<f64>,
    /// `QΔ_π s̄̄`.
    pub aggregates: Vec<f64>,
}

/// A graphon together with the quantities every solve needs.
#[derive(Debug, Clone)]
pub struct PreparedGraphon {
    graphon: Graphon,
    partition: Vec<f64>,
    operator: DMatrix<f64>,
    lambda_max: f64,
}

impl PreparedGraphon {
    pub fn new(graphon: &Graphon) -> Result<Self> {
        Ok(Self {
            graphon: graphon.clone(),
            partition: graphon.partition(),
            operator: graphon.operator_matrix(),
            lambda_max: graphon.lambda_max()?,
        })
    }

    pub fn graphon(&self) -> &Graphon {
        &self.graphon
    }

    pub fn partition(&self) -> &[f64] {
        &self.partition
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn cells(&self) -> usize {
        self.partition.len() - 1
    }

    fn step_fn(&self, values: &DVector<f64>) -> PiecewiseConstantFn {
        PiecewiseConstantFn::new(self.partition.clone(), values.iter().copied().collect())
            .expect("finite values on a valid partition")
    }

    fn check_spectral(&self, spec: &GameSpec, eta: &[f64]) -> Result<()> {
        let coefficient = spec.aggregate_coefficient(eta);
        if coefficient * self.lambda_max < 1.0 {
            Ok(())
        } else {
            Err(Error::SpectralConditionViolated {
                coefficient,
                lambda_max: self.lambda_max,
            })
        }
    }

    fn residual(&self, s: &DVector<f64>, theta1: &[f64], theta2: &[f64], set: &StrategySet) -> (DVector<f64>, f64) {
        let z = &self.operator * s;
        let r = (0..s.len())
            .map(|c| (s[c] - set.project(theta1[c] + theta2[c] * z[c])).abs())
            .fold(0.0, f64::max);
        (z, r)
    }

    fn finish(
        &self,
        s: DVector<f64>,
        z: DVector<f64>,
        set: &StrategySet,
        iterations: usize,
        residual: f64,
    ) -> GraphonEquilibrium {
        let interior = s.iter().all(|&v| set.is_interior(v));
        GraphonEquilibrium {
            strategy: self.step_fn(&s),
            aggregate: self.step_fn(&z),
            interior,
            iterations,
            residual,
        }
    }

    /// Projected best-response iteration from `s₀ = 0`.
    pub fn solve_fixed_point(&self, spec: &GameSpec, eta: &[f64], tol: f64, max_iter: usize) -> Result<GraphonEquilibrium> {
        let (theta1, theta2) = spec.cell_coefficients(eta, &self.graphon)?;
        let margin = 1.0 - spec.aggregate_coefficient(eta) * self.lambda_max;
        if !(margin > 0.0) {
            return Err(Error::NotAContraction { margin });
        }
        let set = &spec.strategy_set;
        let n = self.cells();
        let mut s = DVector::zeros(n);
        let mut z = DVector::zeros(n);
        for iter in 1..=max_iter {
            self.operator.mul_to(&s, &mut z);
            let mut change: f64 = 0.0;
            for c in 0..n {
                let next = set.project(theta1[c] + theta2[c] * z[c]);
                change = change.max((next - s[c]).abs());
                s[c] = next;
            }
            if change <= tol {
                let (z, residual) = self.residual(&s, &theta1, &theta2, set);
                return Ok(self.finish(s, z, set, iter, residual));
            }
        }
        Err(Error::NoConvergence { iterations: max_iter })
    }

    /// Unprojected equilibrium `(I − diag(θ₂) K)⁻¹ θ₁` with its factorization.
    pub fn resolvent(&self, spec: &GameSpec, eta: &[f64]) -> Result<ResolventSolve> {
        self.check_spectral(spec, eta)?;
        let (theta1, theta2) = spec.cell_coefficients(eta, &self.graphon)?;
        self.factorize(theta1, theta2)
    }

    fn factorize(&self, theta1: Vec<f64>, theta2: Vec<f64>) -> Result<ResolventSolve> {
        let n = self.cells();
        let mut v = -DMatrix::from_diagonal(&DVector::from_column_slice(&theta2)) * &self.operator;
        for c in 0..n {
            v[(c, c)] += 1.0;
        }
        let lu = v.lu();
        let strategy = lu.solve(&DVector::from_column_slice(&theta1)).ok_or(Error::SingularSystem)?;
        if strategy.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        let aggregate = &self.operator * &strategy;
        Ok(ResolventSolve {
            lu,
            strategy,
            aggregate,
            theta1,
            theta2,
        })
    }

    fn resolvent_equilibrium(&self, r: ResolventSolve, set: &StrategySet) -> GraphonEquilibrium {
        let (_, residual) = self.residual(&r.strategy, &r.theta1, &r.theta2, set);
        self.finish(r.strategy, r.aggregate, set, 0, residual)
    }

    /// Equilibrium via the resolvent, with residual and interior flag.
    pub fn solve_resolvent(&self, spec: &GameSpec, eta: &[f64]) -> Result<GraphonEquilibrium> {
        let r = self.resolvent(spec, eta)?;
        Ok(self.resolvent_equilibrium(r, &spec.strategy_set))
    }

    /// The equilibrium, by resolvent when it is interior and by projected
    /// iteration otherwise.
    pub fn solve(&self, spec: &GameSpec, eta: &[f64]) -> Result<GraphonEquilibrium> {
        let eq = self.solve_resolvent(spec, eta)?;
        if eq.interior {
            Ok(eq)
        } else {
            self.solve_fixed_point(spec, eta, DEFAULT_TOL, DEFAULT_MAX_ITER)
        }
    }

    fn interior_resolvent(&self, spec: &GameSpec, eta: &[f64]) -> Result<ResolventSolve> {
        let r = self.resolvent(spec, eta)?;
        if r.strategy.iter().all(|&v| spec.strategy_set.is_interior(v)) {
            Ok(r)
        } else {
            Err(Error::NotInterior)
        }
    }

    /// `∂s̄/∂η_k` for every coordinate, as cell vectors.
    fn gradient_vectors(&self, spec: &GameSpec, r: &ResolventSolve) -> Vec<DVector<f64>> {
        (0..spec.dim())
            .map(|k| {
                let (d1, d2) = spec.cell_coefficient_derivatives(k, &self.graphon);
                let rhs = DVector::from_fn(d1.len(), |c, _| d1[c] + d2[c] * r.aggregate[c]);
                r.lu.solve(&rhs).expect("factorization succeeded for the strategy solve")
            })
            .collect()
    }

    pub fn equilibrium_gradient(&self, spec: &GameSpec, eta: &[f64]) -> Result<Vec<PiecewiseConstantFn>> {
        let r = self.interior_resolvent(spec, eta)?;
        Ok(self.gradient_vectors(spec, &r).iter().map(|v| self.step_fn(v)).collect())
    }

    pub fn equilibrium_second_derivatives(&self, spec: &GameSpec, eta: &[f64]) -> Result<Vec<Vec<PiecewiseConstantFn>>> {
        let r = self.interior_resolvent(spec, eta)?;
        let grads = self.gradient_vectors(spec, &r);
        Ok(self
            .second_derivative_vectors(spec, &r, &grads)
            .iter()
            .map(|row| row.iter().map(|v| self.step_fn(v)).collect())
            .collect())
    }

    fn second_derivative_vectors(&self, spec: &GameSpec, r: &ResolventSolve, grads: &[DVector<f64>]) -> Vec<Vec<DVector<f64>>> {
        let n = spec.dim();
        let d2: Vec<Vec<f64>> = (0..n)
            .map(|k| spec.cell_coefficient_derivatives(k, &self.graphon).1)
            .collect();
        let k_grads: Vec<DVector<f64>> = grads.iter().map(|g| &self.operator * g).collect();
        let mut out = vec![vec![DVector::zeros(self.cells()); n]; n];
        for i in 0..n {
            for j in i..n {
                let rhs = DVector::from_fn(self.cells(), |c, _| d2[i][c] * k_grads[j][c] + d2[j][c] * k_grads[i][c]);
                let h = r.lu.solve(&rhs).expect("factorization succeeded for the strategy solve");
                out[j][i] = h.clone();
                out[i][j] = h;
            }
        }
        out
    }

    /// Equilibrium with first and second derivatives from one factorization.
    pub fn solve_with_derivatives(&self, spec: &GameSpec, eta: &[f64], second_order: bool) -> Result<EquilibriumDerivatives> {
        let r = self.interior_resolvent(spec, eta)?;
        let grads = self.gradient_vectors(spec, &r);
        let hess = second_order.then(|| self.second_derivative_vectors(spec, &r, &grads));
        Ok(EquilibriumDerivatives {
            strategy: self.step_fn(&r.strategy),
            gradient: grads.iter().map(|v| self.step_fn(v)).collect(),
            second: hess.map(|h| h.iter().map(|row| row.iter().map(|v| self.step_fn(v)).collect()).collect()),
        })
    }
}

/// Factorized `V = I − diag(θ₂) K` and the unprojected equilibrium.
#[derive(Debug, Clone)]
pub struct ResolventSolve {
    lu: LU<f64, Dyn, Dyn>,
    pub strategy: DVector<f64>,
    pub aggregate: DVector<f64>,
    theta1: Vec<f64>,
    theta2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EquilibriumDerivatives {
    pub strategy: PiecewiseConstantFn,
    pub gradient: Vec<PiecewiseConstantFn>,
    /// Symmetric `n × n` array of second derivatives, when requested.
    pub second: Option<Vec<Vec<PiecewiseConstantFn>>>,
}

pub fn solve_fixed_point(g: &Graphon, spec: &GameSpec, eta: &[f64], tol: f64, max_iter: usize) -> Result<GraphonEquilibrium> {
    PreparedGraphon::new(g)?.solve_fixed_point(spec, eta, tol, max_iter)
}

/// Bonacich-type closed form `(𝕀 − η₂𝕎)⁻¹ η₁ 𝟙`; the interior flag compares against `set`.
pub fn solve_lq_homogeneous(g: &Graphon, eta: [f64; 2], set: StrategySet) -> Result<GraphonEquilibrium> {
    let prepared = PreparedGraphon::new(g)?;
    if !(eta[1].abs() * prepared.lambda_max() < 1.0) {
        return Err(Error::SpectralConditionViolated {
            coefficient: eta[1].abs(),
            lambda_max: prepared.lambda_max(),
        });
    }
    let cells = prepared.cells();
    let r = prepared.factorize(vec![eta[0]; cells], vec![eta[1]; cells])?;
    Ok(prepared.resolvent_equilibrium(r, &set))
}

/// Community equilibrium `θ₁ (I − Δ_η QΔ_π)⁻¹ 𝟙` of the block-model game.
pub fn solve_lq_sbm(q: &DMatrix<f64>, pi: &[f64], theta1: f64, eta: &[f64]) -> Result<BlockEquilibrium> {
    let k = pi.len();
    if q.nrows() != k || q.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: q.nrows(),
        });
    }
    if eta.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: eta.len(),
        });
    }
    if !(theta1 > 0.0) {
        return Err(Error::InvalidGame(format!("theta1 = {theta1} must be positive")));
    }
    let lambda = Graphon::Sbm {
        q: q.clone(),
        pi: pi.to_vec(),
    }
    .lambda_max()?;
    let coefficient = eta.iter().fold(0.0, |m: f64, e| m.max(e.abs()));
    if !(coefficient * lambda < 1.0) {
        return Err(Error::SpectralConditionViolated {
            coefficient,
            lambda_max: lambda,
        });
    }
    let q_pi = DMatrix::from_fn(k, k, |i, j| q[(i, j)] * pi[j]);
    let v = DMatrix::identity(k, k) - DMatrix::from_fn(k, k, |i, j| eta[i] * q_pi[(i, j)]);
    let values = v.lu().solve(&DVector::from_element(k, theta1)).ok_or(Error::SingularSystem)?;
    let aggregates = &q_pi * &values;
    Ok(BlockEquilibrium {
        values: values.iter().copied().collect(),
        aggregates: aggregates.iter().copied().collect(),
    })
}

pub fn equilibrium_gradient(g: &Graphon, spec: &GameSpec, eta: &[f64]) -> Result<Vec<PiecewiseConstantFn>> {
    PreparedGraphon::new(g)?.equilibrium_gradient(spec, eta)
}

pub fn equilibrium_second_derivatives(g: &Graphon, spec: &GameSpec, eta: &[f64]) -> Result<Vec<Vec<PiecewiseConstantFn>>> {
    PreparedGraphon::new(g)?.equilibrium_second_derivatives(spec, eta)
}
