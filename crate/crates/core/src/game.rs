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

//! Linear-quadratic payoffs, strategy sets, parameter boxes, and the map from
//! the unknown parameter `η` to each agent's heterogeneity `θ_η(x)`.

use crate::error::{Error, Result};
use crate::functionspace::interval_index;
use crate::graphon::{community_breakpoints, Graphon};

/// Relative distance from the bounds below which a strategy counts as on the boundary.
pub const INTERIOR_REL_TOL: f64 = 1e-9;

/// Compact interval of admissible scalar strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategySet {
    lower: f64,
    upper: f64,
}

impl StrategySet {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidGame(format!(
                "strategy set [{lower}, {upper}] must be a finite nonempty interval"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn s_max(&self) -> f64 {
        self.lower.abs().max(self.upper.abs())
    }

    pub fn project(&self, s: f64) -> f64 {
        s.clamp(self.lower, self.upper)
    }

    /// Whether `s` is farther than `1e-9 · (upper − lower)` from both bounds.
    pub fn is_interior(&self, s: f64) -> bool {
        let band = INTERIOR_REL_TOL * (self.upper - self.lower);
        s - self.lower > band && self.upper - s > band
    }
}

/// Axis-aligned box `Ξ = Π [lo_i, hi_i]` in the nonnegative orthant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::NoStart);
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidGame(format!(
                    "parameter interval {i} = [{lo}, {hi}] is empty or unbounded"
                )));
            }
            if *lo < 0.0 {
                return Err(Error::InvalidGame(format!(
                    "parameter interval {i} has negative lower bound {lo}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, eta: &[f64]) -> bool {
        eta.len() == self.dim()
            && eta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(e, (lo, hi))| lo <= e && e <= hi)
    }

    /// Whether `eta` lies strictly inside the box.
    pub fn contains_interior(&self, eta: &[f64]) -> bool {
        eta.len() == self.dim()
            && eta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(e, (lo, hi))| lo < e && e < hi)
    }

    pub fn project(&self, eta: &[f64]) -> Vec<f64> {
        eta.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(e, (lo, hi))| e.clamp(*lo, *hi))
            .collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Point at relative position `u ∈ [0,1]^n` inside the box.
    pub fn at(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(t, (lo, hi))| lo + t * (hi - lo))
            .collect()
    }

    /// All `2^n` corners, in binary counting order.
    pub fn corners(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let n = self.dim();
        (0..1usize << n).map(move |mask| {
            (0..n)
                .map(|i| if mask >> i & 1 == 1 { self.upper[i] } else { self.lower[i] })
                .collect()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GameVariant {
    /// `θ_η(x) = (η₁, η₂)` for every agent.
    LqHomogeneous,
    /// Known standalone return `θ₁`; community `k` has aggregate effect `η_k`.
    LqSbm { theta1: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub variant: GameVariant,
    pub strategy_set: StrategySet,
    pub xi: ParameterBox,
}

/// `−½ s² + (θ₁ + θ₂ z) s`.
pub fn lq_payoff(s: f64, z: f64, theta: (f64, f64)) -> f64 {
    -0.5 * s * s + (theta.0 + theta.1 * z) * s
}

/// Maximizer of [`lq_payoff`] over the strategy set: `Π_S[θ₁ + θ₂ z]`.
pub fn best_response(z: f64, theta: (f64, f64), set: &StrategySet) -> f64 {
    set.project(theta.0 + theta.1 * z)
}

impl GameSpec {
    pub fn new(variant: GameVariant, strategy_set: StrategySet, xi: ParameterBox) -> Result<Self> {
        match variant {
            GameVariant::LqHomogeneous => {
                if xi.dim() != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        got: xi.dim(),
                    });
                }
            }
            GameVariant::LqSbm { theta1 } => {
                if !(theta1 > 0.0 && theta1.is_finite()) {
                    return Err(Error::InvalidGame(format!(
                        "standalone return theta1 = {theta1} must be positive"
                    )));
                }
                if strategy_set.lower() < 0.0 {
                    return Err(Error::InvalidGame("block-model games need nonnegative strategies".into()));
                }
            }
        }
        Ok(Self {
            variant,
            strategy_set,
            xi,
        })
    }

    pub fn dim(&self) -> usize {
        self.xi.dim()
    }

    /// `θ_η(x)`; `pi` holds the community weights and is ignored by the
    /// homogeneous variant.
    pub fn theta_of_eta(&self, eta: &[f64], x: f64, pi: &[f64]) -> Result<(f64, f64)> {
        if !self.xi.contains(eta) {
            return Err(Error::ParameterOutOfBox { eta: eta.to_vec() });
        }
        match self.variant {
            GameVariant::LqHomogeneous => Ok((eta[0], eta[1])),
            GameVariant::LqSbm { theta1 } => {
                if pi.len() != eta.len() {
                    return Err(Error::DimensionMismatch {
                        expected: eta.len(),
                        got: pi.len(),
                    });
                }
                let k = interval_index(&community_breakpoints(pi), x);
                Ok((theta1, eta[k]))
            }
        }
    }

    /// Largest aggregate-effect coefficient `θ₂` at `eta`.
    pub fn aggregate_coefficient(&self, eta: &[f64]) -> f64 {
        match self.variant {
            GameVariant::LqHomogeneous => eta[1].abs(),
            GameVariant::LqSbm { .. } => eta.iter().fold(0.0, |m, e| m.max(e.abs())),
        }
    }

    /// Largest aggregate-effect coefficient over the corners of `Ξ`.
    pub fn max_aggregate_coefficient(&self) -> f64 {
        self.xi.corners().map(|c| self.aggregate_coefficient(&c)).fold(0.0, f64::max)
    }

    /// Checks that the graphon's partition carries this game's heterogeneity.
    pub fn check_graphon(&self, g: &Graphon) -> Result<()> {
        match (self.variant, g) {
            (GameVariant::LqHomogeneous, _) => Ok(()),
            (GameVariant::LqSbm { .. }, Graphon::Sbm { pi, .. }) if pi.len() == self.dim() => Ok(()),
            (GameVariant::LqSbm { .. }, Graphon::Sbm { pi, .. }) => Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: pi.len(),
            }),
            (GameVariant::LqSbm { .. }, _) => Err(Error::IncompatibleGraphon(
                "community-heterogeneous games need a block-model graphon".into(),
            )),
        }
    }

    /// Community weights used to map agents to parameters (empty for homogeneous games).
    pub fn community_weights<'a>(&self, g: &'a Graphon) -> &'a [f64] {
        match (self.variant, g) {
            (GameVariant::LqSbm { .. }, Graphon::Sbm { pi, .. }) => pi,
            _ => &[],
        }
    }

    /// Per-cell coefficients `(θ₁, θ₂)` on the graphon's partition.
    ///
    /// Does not check `eta ∈ Ξ`: derivative checks step slightly outside the box.
    pub fn cell_coefficients(&self, eta: &[f64], g: &Graphon) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_graphon(g)?;
        if eta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: eta.len(),
            });
        }
        let cells = g.num_cells();
        Ok(match self.variant {
            GameVariant::LqHomogeneous => (vec![eta[0]; cells], vec![eta[1]; cells]),
            GameVariant::LqSbm { theta1 } => (vec![theta1; cells], eta.to_vec()),
        })
    }

    /// `(∂θ₁/∂η_k, ∂θ₂/∂η_k)` per cell. Both variants are affine in `η`.
    pub fn cell_coefficient_derivatives(&self, k: usize, g: &Graphon) -> (Vec<f64>, Vec<f64>) {
        let cells = g.num_cells();
        let unit = |on: bool| vec![if on { 1.0 } else { 0.0 }; cells];
        match self.variant {
            GameVariant::LqHomogeneous => (unit(k == 0), unit(k == 1)),
            GameVariant::LqSbm { .. } => {
                let mut e = vec![0.0; cells];
                e[k] = 1.0;
                (vec![0.0; cells], e)
            }
        }
    }
}

/// `1 − λ_max(𝕎) · max_{corners of Ξ} θ₂`; positive certifies a unique
/// equilibrium for every parameter in the box.
pub fn contraction_margin(spec: &GameSpec, g: &Graphon) -> Result<f64> {
    Ok(1.0 - g.lambda_max()? * spec.max_aggregate_coefficient())
}

/// Margin of the best-response contraction at a single parameter.
pub fn contraction_margin_at(spec: &GameSpec, g: &Graphon, eta: &[f64]) -> Result<f64> {
    Ok(1.0 - g.lambda_max()? * spec.aggregate_coefficient(eta))
}
