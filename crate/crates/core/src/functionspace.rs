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

//! Piecewise-constant functions on the unit interval.
//!
//! Every function the estimator compares (graphon equilibria of block models,
//! interpolated network equilibria, aggregates) is a step function, so norms
//! and inner products are evaluated exactly on the merged partition of the
//! two operands instead of by quadrature.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Breakpoints closer than this are treated as the same point when merging.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// A step function on `[0, 1]`.
///
/// The value on `[b_j, b_{j+1})` is `values[j]`; the point `x = 1` takes the
/// value of the last interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantFn {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstantFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::MalformedPartition("need at least two breakpoints".into()));
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::MalformedPartition(format!(
                "{} breakpoints require {} values, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                values.len()
            )));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::MalformedPartition("partition must start at 0 and end at 1".into()));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::MalformedPartition(format!(
                "breakpoints not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::MalformedPartition(format!("non-finite value {v}")));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
            values: vec![c],
        }
    }

    /// Step function on the regular grid `{i/N}` whose `i`-th cell carries `s[i]`.
    pub fn interpolate(s: &[f64]) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::EmptyVector);
        }
        Self::new(uniform_breakpoints(s.len()), s.to_vec())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_intervals(&self) -> usize {
        self.values.len()
    }

    /// Length of every interval, in order.
    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints.windows(2).map(|w| w[1] - w[0])
    }

    /// Index of the interval containing `x`, with `x = 1` mapped to the last one.
    pub fn interval_index(&self, x: f64) -> usize {
        interval_index(&self.breakpoints, x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.interval_index(x)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// Combines two functions pointwise on their merged partition.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut breakpoints = Vec::with_capacity(self.breakpoints.len() + other.breakpoints.len());
        let mut values = Vec::with_capacity(breakpoints.capacity());
        breakpoints.push(0.0);
        for_each_merged(self, other, |_, right, a, b| {
            breakpoints.push(right);
            values.push(f(a, b));
        });
        Self { breakpoints, values }
    }

    pub fn integral(&self) -> f64 {
        self.widths().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.widths().zip(&self.values).map(|(w, v)| w * v * v).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Integral of the function over the interval `[a, b]`.
    pub fn integral_over(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for (j, w) in self.breakpoints.windows(2).enumerate() {
            let lo = w[0].max(a);
            let hi = w[1].min(b);
            if hi > lo {
                total += (hi - lo) * self.values[j];
            }
        }
        total
    }
}

pub fn make_piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<PiecewiseConstantFn> {
    PiecewiseConstantFn::new(breakpoints, values)
}

pub fn interpolate_equilibrium(s: &[f64]) -> Result<PiecewiseConstantFn> {
    PiecewiseConstantFn::interpolate(s)
}

/// Exact `sqrt(∫ (f - g)^2)`.
pub fn l2_distance(f: &PiecewiseConstantFn, g: &PiecewiseConstantFn) -> f64 {
    let mut total = 0.0;
    for_each_merged(f, g, |left, right, a, b| {
        let d = a - b;
        total += (right - left) * d * d;
    });
    total.sqrt()
}

/// Exact `∫ f g`.
pub fn integrate_product(f: &PiecewiseConstantFn, g: &PiecewiseConstantFn) -> f64 {
    let mut total = 0.0;
    for_each_merged(f, g, |left, right, a, b| {
        total += (right - left) * a * b;
    });
    total
}

pub(crate) fn uniform_breakpoints(n: usize) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    b[n] = 1.0;
    b
}

pub(crate) fn interval_index(breakpoints: &[f64], x: f64) -> usize {
    let last = breakpoints.len() - 2;
    // number of interior breakpoints <= x
    let k = breakpoints[1..=last].partition_point(|&b| b <= x);
    k.min(last)
}

/// Walks the merged partition of `f` and `g`, calling `visit(left, right, f, g)`
/// once per merged interval. Breakpoints of the two operands within
/// [`MERGE_TOLERANCE`] of each other are coalesced.
fn for_each_merged(f: &PiecewiseConstantFn, g: &PiecewiseConstantFn, mut visit: impl FnMut(f64, f64, f64, f64)) {
    let (fb, gb) = (&f.breakpoints, &g.breakpoints);
    let (nf, ng) = (f.values.len(), g.values.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut left = 0.0;
    while i < nf && j < ng {
        let (fr, gr) = (fb[i + 1], gb[j + 1]);
        let mut right = fr.min(gr);
        let next_i = if fr - right <= MERGE_TOLERANCE { i + 1 } else { i };
        let next_j = if gr - right <= MERGE_TOLERANCE { j + 1 } else { j };
        let last = next_i == nf && next_j == ng;
        if last {
            right = 1.0;
        }
        if right - left > MERGE_TOLERANCE || last {
            visit(left, right, f.values[i], g.values[j]);
            left = right;
        }
        i = next_i;
        j = next_j;
    }
}

impl Add for &PiecewiseConstantFn {
    type Output = PiecewiseConstantFn;
    fn add(self, rhs: Self) -> PiecewiseConstantFn {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &PiecewiseConstantFn {
    type Output = PiecewiseConstantFn;
    fn sub(self, rhs: Self) -> PiecewiseConstantFn {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &PiecewiseConstantFn {
    type Output = PiecewiseConstantFn;
    fn mul(self, rhs: f64) -> PiecewiseConstantFn {
        self.scale(rhs)
    }
}

impl PiecewiseConstantFn {
    /// `∫_{P_k} f` for every cell `P_k` of a partition of `[0, 1]`.
    pub fn cell_integrals(&self, partition: &[f64]) -> Vec<f64> {
        let cells = partition.len() - 1;
        let mut out = vec![0.0; cells];
        let mut k = 0;
        for (j, w) in self.breakpoints.windows(2).enumerate() {
            let (mut lo, hi) = (w[0], w[1]);
            loop {
                while k + 1 < cells && partition[k + 1] <= lo {
                    k += 1;
                }
                let right = if k + 1 == cells { hi } else { hi.min(partition[k + 1]) };
                out[k] += (right - lo) * self.values[j];
                if right >= hi {
                    break;
                }
                lo = right;
            }
        }
        out
    }
}
