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

//! Graphons with piecewise-constant kernels and their integral operator.
//!
//! All three variants are step kernels on a partition of `[0, 1]` (one cell
//! for a constant graphon, the communities of a block model, or the uniform
//! cells of a grid), so the operator `(𝕎 f)(x) = ∫ W(x, y) f(y) dy` maps any
//! step function to a step function on the graphon's own partition and is
//! represented exactly by the matrix `A diag(widths)`.

use std::fmt;
use std::io::BufRead;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::functionspace::{interval_index, uniform_breakpoints, PiecewiseConstantFn};
use crate::spectral::{power_iteration, POWER_MAX_ITER, POWER_TOL};

/// Resolution used when rasterizing a kernel onto a grid.
pub const DEFAULT_GRID_RESOLUTION: usize = 1000;
const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Graphon {
    Constant(f64),
    /// Stochastic block model: community `k` occupies
    /// `[π_1 + … + π_{k-1}, π_1 + … + π_k)` and `W = Q_ij` on `C_i × C_j`.
    Sbm {
        q: DMatrix<f64>,
        pi: Vec<f64>,
    },
    /// Kernel constant on the cells of the uniform `M × M` grid.
    Grid(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Asymmetric { i: usize, j: usize },
    OutOfRange { value: f64 },
    NotASimplex { sum: f64 },
    NonPositiveWeight { k: usize, value: f64 },
    ShapeMismatch { rows: usize, cols: usize, expected: usize },
    Empty,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Asymmetric { i, j } => write!(f, "asymmetric at ({i}, {j})"),
            Violation::OutOfRange { value } => write!(f, "kernel value {value} outside [0, 1]"),
            Violation::NotASimplex { sum } => write!(f, "not a simplex: weights sum to {sum}"),
            Violation::NonPositiveWeight { k, value } => {
                write!(f, "not a simplex: weight {k} is {value}")
            }
            Violation::ShapeMismatch { rows, cols, expected } => {
                write!(f, "matrix is {rows}x{cols}, expected {expected}x{expected}")
            }
            Violation::Empty => write!(f, "empty kernel"),
        }
    }
}

impl Graphon {
    pub fn constant(c: f64) -> Result<Self> {
        Self::checked(Graphon::Constant(c))
    }

    pub fn sbm(q: DMatrix<f64>, pi: Vec<f64>) -> Result<Self> {
        Self::checked(Graphon::Sbm { q, pi })
    }

    pub fn sbm_from_rows(rows: &[Vec<f64>], pi: Vec<f64>) -> Result<Self> {
        Self::sbm(matrix_from_rows(rows)?, pi)
    }

    pub fn grid(values: DMatrix<f64>) -> Result<Self> {
        Self::checked(Graphon::Grid(values))
    }

    fn checked(g: Graphon) -> Result<Self> {
        let violations = g.validate();
        if violations.is_empty() {
            Ok(g)
        } else {
            Err(Error::InvalidGraphon(violations.iter().map(ToString::to_string).collect()))
        }
    }

    /// Symmetry, range and simplex checks. Never fails; returns every violation found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        match self {
            Graphon::Constant(c) => {
                if !(0.0..=1.0).contains(c) {
                    out.push(Violation::OutOfRange { value: *c });
                }
            }
            Graphon::Sbm { q, pi } => {
                if pi.is_empty() {
                    out.push(Violation::Empty);
                }
                if q.nrows() != pi.len() || q.ncols() != pi.len() {
                    out.push(Violation::ShapeMismatch {
                        rows: q.nrows(),
                        cols: q.ncols(),
                        expected: pi.len(),
                    });
                }
                check_kernel(q, &mut out);
                for (k, &p) in pi.iter().enumerate() {
                    if !(p > 0.0) {
                        out.push(Violation::NonPositiveWeight { k, value: p });
                    }
                }
                let sum: f64 = pi.iter().sum();
                if (sum - 1.0).abs() > SIMPLEX_TOL {
                    out.push(Violation::NotASimplex { sum });
                }
            }
            Graphon::Grid(a) => {
                if a.is_empty() {
                    out.push(Violation::Empty);
                }
                if a.nrows() != a.ncols() {
                    out.push(Violation::ShapeMismatch {
                        rows: a.nrows(),
                        cols: a.ncols(),
                        expected: a.nrows(),
                    });
                }
                check_kernel(a, &mut out);
            }
        }
        out
    }

    /// Number of cells of the natural partition.
    pub fn num_cells(&self) -> usize {
        match self {
            Graphon::Constant(_) => 1,
            Graphon::Sbm { pi, .. } => pi.len(),
            Graphon::Grid(a) => a.nrows(),
        }
    }

    /// Breakpoints of the partition on which the kernel is constant.
    pub fn partition(&self) -> Vec<f64> {
        match self {
            Graphon::Constant(_) => vec![0.0, 1.0],
            Graphon::Sbm { pi, .. } => community_breakpoints(pi),
            Graphon::Grid(a) => uniform_breakpoints(a.nrows()),
        }
    }

    pub fn cell_widths(&self) -> Vec<f64> {
        match self {
            Graphon::Constant(_) => vec![1.0],
            Graphon::Sbm { pi, .. } => pi.clone(),
            Graphon::Grid(a) => vec![1.0 / a.nrows() as f64; a.nrows()],
        }
    }

    /// Kernel value on each pair of cells.
    pub fn kernel_matrix(&self) -> DMatrix<f64> {
        match self {
            Graphon::Constant(c) => DMatrix::from_element(1, 1, *c),
            Graphon::Sbm { q, .. } => q.clone(),
            Graphon::Grid(a) => a.clone(),
        }
    }

    /// Matrix of `𝕎` acting on cell values: `A diag(widths)`.
    pub fn operator_matrix(&self) -> DMatrix<f64> {
        let mut m = self.kernel_matrix();
        for (j, w) in self.cell_widths().into_iter().enumerate() {
            m.column_mut(j).scale_mut(w);
        }
        m
    }

    /// Cell containing `x`; the right endpoint belongs to the last cell.
    pub fn cell_of(&self, x: f64) -> usize {
        match self {
            Graphon::Constant(_) => 0,
            Graphon::Sbm { pi, .. } => interval_index(&community_breakpoints(pi), x),
            Graphon::Grid(a) => ((x * a.nrows() as f64) as usize).min(a.nrows() - 1),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain { x, y });
        }
        Ok(match self {
            Graphon::Constant(c) => *c,
            Graphon::Sbm { q, pi } => {
                let b = community_breakpoints(pi);
                q[(interval_index(&b, x), interval_index(&b, y))]
            }
            Graphon::Grid(a) => a[(self.cell_of(x), self.cell_of(y))],
        })
    }

    /// `𝕎 f`, returned on the graphon's partition.
    pub fn apply_operator(&self, f: &PiecewiseConstantFn) -> PiecewiseConstantFn {
        let masses = f.cell_integrals(&self.partition());
        let a = self.kernel_matrix();
        let values = (0..a.nrows())
            .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * masses[j]).sum())
            .collect();
        PiecewiseConstantFn::new(self.partition(), values).expect("graphon partition is valid by construction")
    }

    /// Largest eigenvalue of `𝕎`.
    pub fn lambda_max(&self) -> Result<f64> {
        match self {
            Graphon::Constant(c) => Ok(*c),
            Graphon::Sbm { q, pi } => {
                // Q Δ_π is similar to the symmetric Δ_π^{1/2} Q Δ_π^{1/2}
                let k = pi.len();
                let sym = DMatrix::from_fn(k, k, |i, j| pi[i].sqrt() * q[(i, j)] * pi[j].sqrt());
                Ok(SymmetricEigen::new(sym).eigenvalues.max())
            }
            Graphon::Grid(a) => {
                let m = a.nrows();
                let scale = 1.0 / m as f64;
                let shift = self.sup_degree();
                power_iteration(m, shift, POWER_TOL, POWER_MAX_ITER, |v, out| {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = scale * a.row(i).iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
                    }
                })
            }
        }
    }

    /// `ess sup_x ∫ W(x, y) dy`, the maximal degree.
    pub fn sup_degree(&self) -> f64 {
        let k = self.operator_matrix();
        k.row_iter().map(|r| r.sum()).fold(0.0, f64::max)
    }

    /// Grid graphon with `m` uniform cells whose kernel averages this one over
    /// each cell pair. Exact for block models when `m` refines the communities.
    pub fn rasterize(&self, m: usize) -> Result<Graphon> {
        if m == 0 {
            return Err(Error::InvalidGraphon(vec!["zero grid resolution".into()]));
        }
        let cells = uniform_breakpoints(m);
        let part = self.partition();
        let a = self.kernel_matrix();
        // overlap[c][k] = |grid cell c ∩ natural cell k|
        let overlap: Vec<Vec<(usize, f64)>> = cells
            .windows(2)
            .map(|w| {
                part.windows(2)
                    .enumerate()
                    .filter_map(|(k, p)| {
                        let len = w[1].min(p[1]) - w[0].max(p[0]);
                        (len > 0.0).then_some((k, len))
                    })
                    .collect()
            })
            .collect();
        let area = 1.0 / (m * m) as f64;
        let mut grid = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut total = 0.0;
                for &(k, li) in &overlap[i] {
                    for &(l, lj) in &overlap[j] {
                        total += a[(k, l)] * li * lj;
                    }
                }
                let v = (total / area).clamp(0.0, 1.0);
                grid[(i, j)] = v;
                grid[(j, i)] = v;
            }
        }
        Graphon::grid(grid)
    }
}

pub fn community_breakpoints(pi: &[f64]) -> Vec<f64> {
    let mut b = Vec::with_capacity(pi.len() + 1);
    b.push(0.0);
    let mut acc = 0.0;
    for p in &pi[..pi.len().saturating_sub(1)] {
        acc += p;
        b.push(acc);
    }
    b.push(1.0);
    b
}

fn check_kernel(a: &DMatrix<f64>, out: &mut Vec<Violation>) {
    if let Some(&value) = a.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        out.push(Violation::OutOfRange { value });
    }
    if a.nrows() == a.ncols() {
        'outer: for i in 0..a.nrows() {
            for j in (i + 1)..a.ncols() {
                if a[(i, j)] != a[(j, i)] {
                    out.push(Violation::Asymmetric { i, j });
                    break 'outer;
                }
            }
        }
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some(r) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: r.len(),
        });
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Reads an `M × M` comma-separated kernel matrix.
pub fn read_grid_csv(reader: impl BufRead) -> std::result::Result<Graphon, String> {
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        rows.push(row);
    }
    let a = matrix_from_rows(&rows).map_err(|e| e.to_string())?;
    Graphon::grid(a).map_err(|e| e.to_string())
}

pub fn lambda_max(g: &Graphon) -> Result<f64> {
    g.lambda_max()
}

pub fn sup_degree(g: &Graphon) -> f64 {
    g.sup_degree()
}

pub fn apply_operator(g: &Graphon, f: &PiecewiseConstantFn) -> PiecewiseConstantFn {
    g.apply_operator(f)
}

pub fn validate(g: &Graphon) -> std::result::Result<(), Vec<Violation>> {
    let v = g.validate();
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}
