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

//! W-random networks and equilibria of the finite games played on them.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with a single `u64`.
//! Draw order is fixed: `N` uniform labels first, then one uniform per pair
//! `(i, j)`, `i < j`, in lexicographic order, regardless of the edge
//! probability. The same `(graphon, N, seed)` therefore yields the same
//! network on every platform and thread count.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functionspace::PiecewiseConstantFn;
use crate::game::GameSpec;
use crate::graphon::Graphon;
use crate::spectral::{power_iteration, POWER_MAX_ITER, POWER_TOL};

/// Network sampled from a graphon; agents are indexed in increasing label order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledNetwork {
    labels: Vec<f64>,
    /// Sorted neighbor lists of the symmetric adjacency `P`.
    neighbors: Vec<Vec<u32>>,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEquilibrium {
    pub strategies: Vec<f64>,
    /// `z^i = (1/N) Σ_j P_ij s_j`.
    pub aggregates: Vec<f64>,
    pub interior: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one Monte Carlo run:
/// `mix64(mix64(mix64(master) ^ n) ^ run)` with `mix64` the SplitMix64 step.
pub fn run_seed(master_seed: u64, run_index: u64, n: u64) -> u64 {
    mix64(mix64(mix64(master_seed) ^ n) ^ run_index)
}

pub fn sample_network(g: &Graphon, n: usize, seed: u64) -> Result<SampledNetwork> {
    if n == 0 {
        return Err(Error::EmptyVector);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    labels.sort_by(f64::total_cmp);
    let cells: Vec<usize> = labels.iter().map(|&t| g.cell_of(t)).collect();
    let kernel = g.kernel_matrix();
    let mut neighbors = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.random();
            if u < kernel[(cells[i], cells[j])] {
                neighbors[i].push(j as u32);
                neighbors[j].push(i as u32);
            }
        }
    }
    // lists are built in increasing order already
    Ok(SampledNetwork { labels, neighbors, seed })
}

impl SampledNetwork {
    /// Builds a network from labels and an edge list (0-indexed pairs).
    pub fn from_edges(labels: Vec<f64>, edges: &[(usize, usize)], seed: u64) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyVector);
        }
        if labels.windows(2).any(|w| w[0] > w[1]) || labels.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::MalformedPartition("labels must be sorted and lie in [0, 1]".into()));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: i.max(j),
                });
            }
            neighbors[i].push(j as u32);
            neighbors[j].push(i as u32);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { labels, neighbors, seed })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&(j as u32)).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Fraction of the `N(N−1)/2` possible edges present.
    pub fn density(&self) -> f64 {
        let n = self.len() as f64;
        if self.len() < 2 {
            return 0.0;
        }
        self.edge_count() as f64 / (0.5 * n * (n - 1.0))
    }

    /// Edges `(i, j)` with `i < j` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().map(|&j| j as usize).filter(move |&j| j > i).map(move |j| (i, j)))
    }

    /// `out = (P / N) s`.
    pub fn normalized_apply(&self, s: &[f64], out: &mut [f64]) {
        let scale = 1.0 / self.len() as f64;
        for (o, list) in out.iter_mut().zip(&self.neighbors) {
            *o = scale * list.iter().map(|&j| s[j as usize]).sum::<f64>();
        }
    }

    /// Largest eigenvalue of `P / N`.
    pub fn lambda_max(&self) -> Result<f64> {
        let n = self.len() as f64;
        let shift = self.neighbors.iter().map(Vec::len).max().unwrap_or(0) as f64 / n;
        power_iteration(self.len(), shift, POWER_TOL, POWER_MAX_ITER, |v, out| {
            self.normalized_apply(v, out)
        })
    }

    /// Writes one `i j` pair per line, 0-indexed with `i < j`.
    pub fn write_edge_list(&self, mut w: impl Write) -> std::io::Result<()> {
        for (i, j) in self.edges() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    /// Writes one label per line with 17 significant digits.
    pub fn write_labels(&self, mut w: impl Write) -> std::io::Result<()> {
        for t in &self.labels {
            writeln!(w, "{}", crate::harness::format_float(*t))?;
        }
        Ok(())
    }

    pub fn read(labels: impl BufRead, edges: impl BufRead, seed: u64) -> std::result::Result<Self, String> {
        let labels = read_column(labels)?;
        let mut list = Vec::new();
        for (lineno, line) in edges.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            let mut parts = line.split_whitespace();
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(format!("edge list line {}: expected `i j`", lineno + 1));
            };
            let parse = |t: &str| t.parse::<usize>().map_err(|e| format!("edge list line {}: {e}", lineno + 1));
            list.push((parse(a)?, parse(b)?));
        }
        Self::from_edges(labels, &list, seed).map_err(|e| e.to_string())
    }
}

/// Reads one decimal number per line, skipping blank lines.
pub fn read_column(r: impl BufRead) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse::<f64>().map_err(|e| format!("line {}: {e}", lineno + 1))?);
    }
    Ok(out)
}

fn agent_coefficients(net: &SampledNetwork, g: &Graphon, spec: &GameSpec, eta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.check_graphon(g)?;
    let pi = spec.community_weights(g);
    let mut theta1 = Vec::with_capacity(net.len());
    let mut theta2 = Vec::with_capacity(net.len());
    for &t in &net.labels {
        let (a, b) = spec.theta_of_eta(eta, t, pi)?;
        theta1.push(a);
        theta2.push(b);
    }
    Ok((theta1, theta2))
}

/// Projected best-response iteration `s ← Π_S[θ₁(t) + θ₂(t) ∘ (P/N) s]` from `s = 0`.
///
/// The graphon supplies the community map from labels to parameters.
pub fn solve_network_game(
    net: &SampledNetwork,
    g: &Graphon,
    spec: &GameSpec,
    eta: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<NetworkEquilibrium> {
    let (theta1, theta2) = agent_coefficients(net, g, spec, eta)?;
    let coefficient = theta2.iter().fold(0.0, |m: f64, t| m.max(t.abs()));
    let margin = 1.0 - coefficient * net.lambda_max()?;
    if !(margin > 0.0) {
        return Err(Error::NotAContraction { margin });
    }
    let set = &spec.strategy_set;
    let n = net.len();
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    for iter in 1..=max_iter {
        net.normalized_apply(&s, &mut z);
        let mut change: f64 = 0.0;
        for i in 0..n {
            let next = set.project(theta1[i] + theta2[i] * z[i]);
            change = change.max((next - s[i]).abs());
            s[i] = next;
        }
        if change <= tol {
            net.normalized_apply(&s, &mut z);
            let residual = (0..n)
                .map(|i| (s[i] - set.project(theta1[i] + theta2[i] * z[i])).abs())
                .fold(0.0, f64::max);
            let interior = s.iter().all(|&v| set.is_interior(v));
            return Ok(NetworkEquilibrium {
                strategies: s,
                aggregates: z,
                interior,
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter })
}

/// Direct dense solve of `(I − diag(θ₂) P/N) s = θ₁`, the equilibrium when no
/// projection binds. Cubic in `N`; meant for cross-checks.
pub fn solve_network_linear(net: &SampledNetwork, g: &Graphon, spec: &GameSpec, eta: &[f64]) -> Result<NetworkEquilibrium> {
    use nalgebra::{DMatrix, DVector};
    let (theta1, theta2) = agent_coefficients(net, g, spec, eta)?;
    let n = net.len();
    let scale = 1.0 / n as f64;
    let mut v = DMatrix::identity(n, n);
    for i in 0..n {
        for &j in net.neighbors(i) {
            v[(i, j as usize)] -= theta2[i] * scale;
        }
    }
    let s = v
        .lu()
        .solve(&DVector::from_vec(theta1.clone()))
        .ok_or(Error::SingularSystem)?;
    let s: Vec<f64> = s.iter().copied().collect();
    let mut z = vec![0.0; n];
    net.normalized_apply(&s, &mut z);
    let set = &spec.strategy_set;
    let residual = (0..n)
        .map(|i| (s[i] - set.project(theta1[i] + theta2[i] * z[i])).abs())
        .fold(0.0, f64::max);
    let interior = s.iter().all(|&v| set.is_interior(v));
    Ok(NetworkEquilibrium {
        strategies: s,
        aggregates: z,
        interior,
        iterations: 0,
        residual,
    })
}

/// The observation `s̄^[N]`: strategies on the regular grid in label order.
pub fn observe(net: &SampledNetwork, eq: &NetworkEquilibrium) -> Result<PiecewiseConstantFn> {
    if eq.strategies.len() != net.len() {
        return Err(Error::DimensionMismatch {
            expected: net.len(),
            got: eq.strategies.len(),
        });
    }
    PiecewiseConstantFn::interpolate(&eq.strategies)
}
