//! Seeded sweep over (β, H, K, trial).

use std::time::Instant;

use entropic_orl::{
    evaluate_policy, generate_dataset, optimal_values, rspvi, tabular_feature_map, uniform_policy,
    va_rspvi, AuxSource, FeatureMap64, FiniteMdp64, RiskParams64, ValueTable64,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ExperimentConfig};
use crate::error::HarnessError;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "ENTROPIC_ORL_WORKERS";

/// Slack in the pessimism check `V̂_1(s_1) ≤ V*_1(s_1) + 1e-9`.
pub const PESSIMISM_SLACK: f64 = 1e-9;

// XORed into the trial seed for the VA-RSPVI split.
const SPLIT_SALT: u64 = 0x5851_F42D_4C95_7F2D;

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub environment: String,
    pub algorithm: String,
    pub beta: f64,
    #[serde(rename = "H")]
    pub horizon: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub trial: usize,
    pub seed: u64,
    pub suboptimality: f64,
    pub wallclock: f64,
    pub pessimism_flag: bool,
    pub chose_optimal_first_action: bool,
}

/// Seed of trial `t`.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    master.wrapping_add(trial as u64)
}

/// Worker count: the config value, else `ENTROPIC_ORL_WORKERS`, else `None` (all CPUs).
pub fn resolve_workers(config: &ExperimentConfig) -> Result<Option<usize>, HarnessError> {
    if let Some(w) = config.workers {
        return Ok(Some(w));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(HarnessError::Validation(format!(
                "{WORKERS_ENV} must be an integer ≥ 1, got `{raw}`"
            ))),
        },
        Err(_) => Ok(None),
    }
}

struct Cell {
    beta: f64,
    horizon: usize,
    mdp: FiniteMdp64,
    fmap: FeatureMap64,
    params: RiskParams64,
    optimal: ValueTable64,
}

struct Task<'a> {
    cell: &'a Cell,
    k: usize,
    trial: usize,
}

/// Runs every trial of `config` and returns the rows in canonical
/// (β, H, K, trial) order, following the order of the configuration lists.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    config.validate()?;
    let workers = resolve_workers(config)?;
    let mut cells = Vec::with_capacity(config.betas.len() * config.horizons.len());
    for &beta in &config.betas {
        for &horizon in &config.horizons {
            let mdp = config.environment.build(horizon)?;
            let params = RiskParams64::new(beta, horizon)?;
            let (optimal, _) = optimal_values(&mdp, &params)?;
            let fmap = tabular_feature_map(&mdp);
            cells.push(Cell {
                beta,
                horizon,
                mdp,
                fmap,
                params,
                optimal,
            });
        }
    }
    let tasks: Vec<Task<'_>> = cells
        .iter()
        .flat_map(|cell| {
            config
                .k_grid
                .iter()
                .flat_map(move |&k| (0..config.trials).map(move |trial| Task { cell, k, trial }))
        })
        .collect();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|task| run_trial(config, task))
            .collect()
    })
}

fn run_trial(config: &ExperimentConfig, task: &Task<'_>) -> Result<ResultRow, HarnessError> {
    let start = Instant::now();
    let cell = task.cell;
    let seed = trial_seed(config.master_seed, task.trial);
    let behavior = uniform_policy(&cell.mdp);
    let data = generate_dataset(&cell.mdp, &behavior, task.k, seed)?;
    let learned = match config.algorithm {
        Algorithm::Rspvi => rspvi(&data, &cell.fmap, &cell.params, &config.rspvi_config())?,
        Algorithm::VaRspvi => va_rspvi(
            &data,
            AuxSource::Split {
                seed: seed ^ SPLIT_SALT,
            },
            &cell.fmap,
            &cell.params,
            &config.va_config(),
        )?,
    };
    let s1 = cell.mdp.initial_state();
    let v_star = cell.optimal.v(1, s1);
    let achieved = evaluate_policy(&cell.mdp, &learned.to_policy(), &cell.params)?.v(1, s1);
    let wallclock = if config.record_wallclock {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    Ok(ResultRow {
        environment: config.environment.label().to_string(),
        algorithm: config.algorithm.label().to_string(),
        beta: cell.beta,
        horizon: cell.horizon,
        k: task.k,
        trial: task.trial,
        seed,
        suboptimality: v_star - achieved,
        wallclock,
        pessimism_flag: learned.v_hat(1, s1) <= v_star + PESSIMISM_SLACK,
        chose_optimal_first_action: cell.optimal.is_greedy(1, s1, learned.action(1, s1)),
    })
}
