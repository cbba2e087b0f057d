//! Per-cell aggregation of trial rows.

use serde::{Deserialize, Serialize};

use crate::experiment::ResultRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub environment: String,
    pub algorithm: String,
    pub beta: f64,
    #[serde(rename = "H")]
    pub horizon: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub trials: usize,
    pub mean_suboptimality: f64,
    pub p10: f64,
    pub p90: f64,
    pub pessimism_frequency: f64,
    pub optimal_action_frequency: f64,
}

/// Symmetric nearest-rank percentiles of `sorted`:
/// `p10 = x_(⌈n/10⌉)` and `p90 = x_(n+1−⌈n/10⌉)` (1-based order statistics).
pub fn band(sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len();
    let lo = n.div_ceil(10).max(1);
    (sorted[lo - 1], sorted[n - lo])
}

/// Groups rows by (environment, algorithm, β, H, K) in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(SummaryKey<'_>, Vec<&ResultRow>)> = Vec::new();
    for row in rows {
        let key = SummaryKey::of(row);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|(key, members)| {
            let n = members.len() as f64;
            let mut subs: Vec<f64> = members.iter().map(|r| r.suboptimality).collect();
            let mean = subs.iter().sum::<f64>() / n;
            subs.sort_by(f64::total_cmp);
            let (p10, p90) = band(&subs);
            let freq =
                |f: fn(&ResultRow) -> bool| members.iter().filter(|r| f(r)).count() as f64 / n;
            SummaryRow {
                environment: key.environment.to_string(),
                algorithm: key.algorithm.to_string(),
                beta: key.beta,
                horizon: key.horizon,
                k: key.k,
                trials: members.len(),
                mean_suboptimality: mean,
                p10,
                p90,
                pessimism_frequency: freq(|r| r.pessimism_flag),
                optimal_action_frequency: freq(|r| r.chose_optimal_first_action),
            }
        })
        .collect()
}

#[derive(PartialEq)]
struct SummaryKey<'a> {
    environment: &'a str,
    algorithm: &'a str,
    beta: f64,
    horizon: usize,
    k: usize,
}

impl<'a> SummaryKey<'a> {
    fn of(row: &'a ResultRow) -> Self {
        Self {
            environment: &row.environment,
            algorithm: &row.algorithm,
            beta: row.beta,
            horizon: row.horizon,
            k: row.k,
        }
    }
}
