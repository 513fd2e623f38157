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

//! Identifiability and derivative diagnostics.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{solve_lq_homogeneous, solve_lq_sbm, BlockEquilibrium, GraphonEquilibrium, PreparedGraphon};
use crate::error::{Error, Result};
use crate::functionspace::{l2_distance, PiecewiseConstantFn};
use crate::game::{GameSpec, StrategySet};
use crate::graphon::Graphon;
use crate::sampling::NetworkEquilibrium;

/// Aggregates whose L² distance to their mean is at most this are constant.
pub const CONSTANT_AGGREGATE_TOL: f64 = 1e-10;
pub const FD_STEP_FIRST: f64 = 1e-5;
pub const FD_STEP_SECOND: f64 = 1e-4;
/// Derivative entries smaller than this fraction of the largest entry of the
/// same order are compared in absolute terms against that fraction.
pub const FD_RELATIVE_FLOOR: f64 = 1e-2;

/// Anything exposing the strategy values of an equilibrium.
pub trait StrategyProfile {
    fn strategy_values(&self) -> &[f64];
}

impl StrategyProfile for GraphonEquilibrium {
    fn strategy_values(&self) -> &[f64] {
        self.strategy.values()
    }
}

impl StrategyProfile for NetworkEquilibrium {
    fn strategy_values(&self) -> &[f64] {
        &self.strategies
    }
}

impl StrategyProfile for BlockEquilibrium {
    fn strategy_values(&self) -> &[f64] {
        &self.values
    }
}

impl StrategyProfile for PiecewiseConstantFn {
    fn strategy_values(&self) -> &[f64] {
        self.values()
    }
}

pub fn check_interior<E: StrategyProfile + ?Sized>(eq: &E, set: &StrategySet) -> bool {
    eq.strategy_values().iter().all(|&v| set.is_interior(v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IdentifiabilityDetail {
    Homogeneous {
        /// `∫ z̄`.
        aggregate_mean: f64,
        /// `‖z̄ − ∫z̄‖_{L²}`.
        aggregate_perp_norm: f64,
        /// Smallest eigenvalue of `[[1, γ], [γ, γ² + 1]]`.
        lambda_m: f64,
        /// `min(1, ‖z̄⊥‖)`.
        nu_bar: f64,
    },
    Sbm {
        min_aggregate: f64,
        min_weight: f64,
        aggregates: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiabilityReport {
    pub identifiable: bool,
    /// `L_η̄` with `‖η − η̄‖ ≤ L_η̄ ‖s̄_η − s̄_η̄‖_{L²}`.
    pub constant: Option<f64>,
    /// `γ` such that only `η₁ + γ η₂` is identifiable.
    pub gamma: Option<f64>,
    pub detail: IdentifiabilityDetail,
}

/// Smallest eigenvalue of `[[1, γ], [γ, γ² + 1]]`.
pub fn lambda_m(gamma: f64) -> f64 {
    let t = gamma * gamma + 2.0;
    (t - (t * t - 4.0).max(0.0).sqrt()) / 2.0
}

/// Identifiability of `η = (η₁, η₂)` in the homogeneous game.
///
/// Splits the equilibrium aggregate into its mean `γ` and the orthogonal
/// part `z̄⊥`; a constant aggregate leaves only `η₁ + γ η₂` identifiable.
pub fn homogeneous_identifiability(g: &Graphon, eta_bar: [f64; 2], set: StrategySet) -> Result<IdentifiabilityReport> {
    let eq = solve_lq_homogeneous(g, eta_bar, set)?;
    if !eq.interior {
        return Err(Error::NotInterior);
    }
    let z = &eq.aggregate;
    let gamma = z.integral();
    let perp = z.map(|v| v - gamma).l2_norm();
    let lm = lambda_m(gamma);
    let nu_bar = perp.min(1.0);
    let detail = IdentifiabilityDetail::Homogeneous {
        aggregate_mean: gamma,
        aggregate_perp_norm: perp,
        lambda_m: lm,
        nu_bar,
    };
    Ok(if perp <= CONSTANT_AGGREGATE_TOL {
        IdentifiabilityReport {
            identifiable: false,
            constant: None,
            gamma: Some(gamma),
            detail,
        }
    } else {
        IdentifiabilityReport {
            identifiable: true,
            constant: Some(2.0 / (lm * nu_bar).sqrt()),
            gamma: None,
            detail,
        }
    })
}

/// `L_η̄ = 2 / (min_i z̄̄_i · √(min_k π_k))` for the block-model game.
pub fn sbm_identifiability_constant(q: &DMatrix<f64>, pi: &[f64], theta1: f64, eta_bar: &[f64]) -> Result<IdentifiabilityReport> {
    let eq = solve_lq_sbm(q, pi, theta1, eta_bar)?;
    let (community, min_aggregate) = eq
        .aggregates
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, z)| if z < acc.1 { (k, z) } else { acc });
    if !(min_aggregate > 0.0) {
        return Err(Error::DegenerateAggregate {
            community,
            value: min_aggregate,
        });
    }
    let min_weight = pi.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(IdentifiabilityReport {
        identifiable: true,
        constant: Some(2.0 / (min_aggregate * min_weight.sqrt())),
        gamma: None,
        detail: IdentifiabilityDetail::Sbm {
            min_aggregate,
            min_weight,
            aggregates: eq.aggregates,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiabilityTest {
    /// Samples with `‖η − η̄‖ > L ‖s̄_η − s̄_η̄‖`.
    pub violations: usize,
    /// Parameters evaluated: `η̄` itself plus the random samples.
    pub evaluated: usize,
    /// Largest observed `‖η − η̄‖ / ‖s̄_η − s̄_η̄‖`, an empirical lower bound on any valid constant.
    pub max_ratio: f64,
}

/// Counts violations of `‖η − η̄‖ ≤ L ‖s̄_η − s̄_η̄‖_{L²}` at `η̄` and at
/// `samples` parameters drawn uniformly from `Ξ`.
///
/// `η = η̄` (both sides zero) is never a violation. A relative slack of
/// `1e-12` absorbs rounding at equality.
pub fn empirical_identifiability_test(
    g: &Graphon,
    spec: &GameSpec,
    eta_bar: &[f64],
    l: f64,
    samples: usize,
    seed: u64,
) -> Result<IdentifiabilityTest> {
    let prepared = PreparedGraphon::new(g)?;
    let reference = prepared.solve(spec, eta_bar)?.strategy;
    let xi = &spec.xi;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = vec![eta_bar.to_vec()];
    for _ in 0..samples {
        let u: Vec<f64> = (0..xi.dim()).map(|_| rng.random::<f64>()).collect();
        draws.push(xi.at(&u));
    }
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for eta in &draws {
        let s = prepared.solve(spec, eta)?.strategy;
        let lhs = eta.iter().zip(eta_bar).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let dist = l2_distance(&s, &reference);
        if lhs > l * dist * (1.0 + 1e-12) {
            violations += 1;
        }
        if dist > 0.0 {
            max_ratio = max_ratio.max(lhs / dist);
        }
    }
    Ok(IdentifiabilityTest {
        violations,
        evaluated: draws.len(),
        max_ratio,
    })
}

/// Worst relative error between analytic derivatives of `s̄_η` and central
/// finite differences (step `1e-5` for order 1, `1e-4` for order 2), over
/// every coordinate pair and partition cell.
///
/// Entries below `FD_RELATIVE_FLOOR` times the largest analytic entry of the
/// same order are measured against that floor instead of their own size.
#[allow(clippy::needless_range_loop)]
pub fn fd_check(g: &Graphon, spec: &GameSpec, eta: &[f64], order: u8) -> Result<f64> {
    let prepared = PreparedGraphon::new(g)?;
    let d = prepared.solve_with_derivatives(spec, eta, order == 2)?;
    let eval = |e: &[f64]| -> Result<Vec<f64>> { Ok(prepared.resolvent(spec, e)?.strategy.iter().copied().collect()) };
    let shifted = |steps: &[(usize, f64)]| -> Result<Vec<f64>> {
        let mut e = eta.to_vec();
        for &(k, h) in steps {
            e[k] += h;
        }
        eval(&e)
    };
    // the step actually taken once `η_k ± h` is rounded
    let span = |k: usize, h: f64| (eta[k] + h) - (eta[k] - h);
    let n = eta.len();
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    match order {
        1 => {
            let h = FD_STEP_FIRST;
            for k in 0..n {
                let plus = shifted(&[(k, h)])?;
                let minus = shifted(&[(k, -h)])?;
                let width = span(k, h);
                let fd = plus.iter().zip(&minus).map(|(p, m)| (p - m) / width).collect();
                pairs.push((d.gradient[k].values().to_vec(), fd));
            }
        }
        2 => {
            let h = FD_STEP_SECOND;
            let center = eval(eta)?;
            let second = d.second.as_ref().expect("second derivatives requested");
            for i in 0..n {
                for j in i..n {
                    let fd: Vec<f64> = if i == j {
                        let plus = shifted(&[(i, h)])?;
                        let minus = shifted(&[(i, -h)])?;
                        (0..center.len())
                            .map(|c| (plus[c] - 2.0 * center[c] + minus[c]) / (h * h))
                            .collect()
                    } else {
                        let pp = shifted(&[(i, h), (j, h)])?;
                        let pm = shifted(&[(i, h), (j, -h)])?;
                        let mp = shifted(&[(i, -h), (j, h)])?;
                        let mm = shifted(&[(i, -h), (j, -h)])?;
                        (0..center.len())
                            .map(|c| (pp[c] - pm[c] - mp[c] + mm[c]) / (4.0 * h * h))
                            .collect()
                    };
                    pairs.push((second[i][j].values().to_vec(), fd));
                }
            }
        }
        _ => return Err(Error::InvalidGame(format!("finite-difference order {order} not supported"))),
    }
    let scale = pairs.iter().flat_map(|(a, _)| a.iter()).fold(0.0, |m: f64, v| m.max(v.abs()));
    let floor = (FD_RELATIVE_FLOOR * scale).max(f64::MIN_POSITIVE);
    Ok(pairs
        .iter()
        .flat_map(|(a, f)| a.iter().zip(f))
        .map(|(a, f)| (a - f).abs() / a.abs().max(floor))
        .fold(0.0, f64::max))
}
