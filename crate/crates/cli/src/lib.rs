//! Experiment harness for `entropic-orl`: seeded sweeps over (β, H, K) on
//! ModelWin, per-cell summaries with 10th/90th percentile bands, CSV and SVG
//! output, and the `entropic-orl` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod plot;
pub mod summary;

pub use config::{Algorithm, Environment, ExperimentConfig, GammaModeName, OutputPaths, Overrides};
pub use error::HarnessError;
pub use experiment::{
    resolve_workers, run_experiment, trial_seed, ResultRow, PESSIMISM_SLACK, WORKERS_ENV,
};
pub use output::{emit_csv, format_float, read_results, write_csv};
pub use plot::{emit_plot, render_svg};
pub use summary::{summarize, SummaryRow};

/// Runs `config` and writes whichever outputs it names.
pub fn run_and_write(
    config: &ExperimentConfig,
) -> Result<(Vec<ResultRow>, Vec<SummaryRow>), HarnessError> {
    let rows = run_experiment(config)?;
    let summary = summarize(&rows);
    for path in [
        &config.output.csv,
        &config.output.summary_csv,
        &config.output.svg,
    ]
    .into_iter()
    .flatten()
    {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
    }
    if let Some(path) = &config.output.csv {
        emit_csv(&rows, path)?;
    }
    if let Some(path) = &config.output.summary_csv {
        emit_csv(&summary, path)?;
    }
    if let Some(path) = &config.output.svg {
        emit_plot(&summary, path)?;
    }
    Ok((rows, summary))
}
