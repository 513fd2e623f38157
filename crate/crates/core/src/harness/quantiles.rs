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

//! Per-`N` empirical quantiles of the estimates.
//!
//! Quantiles use inclusive linear interpolation: for sorted values
//! `x_0 ≤ … ≤ x_{n−1}` and level `p`, with `h = (n − 1) p`,
//! `Q(p) = x_⌊h⌋ + (h − ⌊h⌋)(x_⌊h⌋+1 − x_⌊h⌋)`.

use std::io::Write;

use super::experiment::RunRecord;
use super::format_float;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    /// `eta_hat_<i>`, `err_inf` or `l2_obs_vs_graphon`.
    pub metric: String,
    pub quantile: f64,
    pub value: f64,
}

/// Inclusive linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyGroup("no values".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Quantiles of every `η̂` coordinate, `err_inf` and `l2_obs_vs_graphon` per
/// network size, in order of first appearance of `N`. Failed runs (NaN) are
/// left out; a size with no finite value is an error.
pub fn summarize_quantiles(records: &[RunRecord], quantiles: &[f64]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyGroup("no run records".into()));
    }
    let mut sizes: Vec<usize> = Vec::new();
    for r in records {
        if !sizes.contains(&r.n) {
            sizes.push(r.n);
        }
    }
    let dim = records[0].eta_hat.len();
    let mut rows = Vec::new();
    for n in sizes {
        let group: Vec<&RunRecord> = records.iter().filter(|r| r.n == n).collect();
        let mut metrics: Vec<(String, Vec<f64>)> = (0..dim)
            .map(|i| (format!("eta_hat_{}", i + 1), group.iter().map(|r| r.eta_hat[i]).collect()))
            .collect();
        metrics.push(("err_inf".into(), group.iter().map(|r| r.err_inf).collect()));
        metrics.push((
            "l2_obs_vs_graphon".into(),
            group.iter().map(|r| r.l2_obs_vs_graphon).collect(),
        ));
        for (metric, values) in metrics {
            let finite: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
            if finite.is_empty() {
                return Err(Error::EmptyGroup(format!("N = {n}, {metric}")));
            }
            for &p in quantiles {
                rows.push(SummaryRow {
                    n,
                    metric: metric.clone(),
                    quantile: p,
                    value: quantile(&finite, p)?,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_summary_csv(rows: &[SummaryRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "# quantiles: inclusive linear interpolation, h = (n-1)p")?;
    writeln!(w, "N,metric,quantile,value")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.n, r.metric, r.quantile, format_float(r.value))?;
    }
    Ok(())
}
