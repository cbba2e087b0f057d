//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use entropic_orl::mdp::split_indices;
use entropic_orl::{
    generate_dataset, load_dataset, optimal_values, save_dataset, uniform_policy, OfflineDataset64,
    Provenance, RiskParams64, StochasticPolicy,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Environment, ExperimentConfig};
use crate::error::HarnessError;
use crate::output::{emit_csv, read_results, write_csv};
use crate::plot::emit_plot;
use crate::summary::summarize;

#[derive(Debug, Parser)]
#[command(
    name = "entropic-orl",
    version,
    about = "Risk-sensitive offline RL under the entropic risk measure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment sweep described by a JSON config.
    Run {
        config: PathBuf,
        /// Write every output file into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads (overrides the config and ENTROPIC_ORL_WORKERS).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the optimal entropic value and first action.
    Solve {
        env: String,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long = "H")]
        horizon: usize,
    },
    /// Sample an offline dataset with a behavior policy.
    GenData {
        env: String,
        #[arg(long = "H")]
        horizon: usize,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = BehaviorPolicy::Uniform)]
        policy: BehaviorPolicy,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a dataset in half by trajectories (auxiliary ⌊K/2⌋, main ⌈K/2⌉).
    SplitData {
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        aux: PathBuf,
        #[arg(long)]
        main: PathBuf,
    },
    /// Summarise a per-trial results CSV.
    Summarize {
        csv: PathBuf,
        /// Summary CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BehaviorPolicy {
    Uniform,
    AlwaysA1,
    AlwaysA2,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run_cli<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn out_err(e: std::io::Error) -> HarnessError {
    HarnessError::io("<stdout>", e)
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    match command {
        Command::Run {
            config,
            out_dir,
            workers,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out_dir {
                cfg = cfg.with_output_dir(&dir);
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            let (rows, summary) = crate::run_and_write(&cfg)?;
            writeln!(stdout, "{} trials over {} cells", rows.len(), summary.len())
                .map_err(out_err)?;
            for path in [&cfg.output.csv, &cfg.output.summary_csv, &cfg.output.svg]
                .into_iter()
                .flatten()
            {
                writeln!(stdout, "wrote {}", path.display()).map_err(out_err)?;
            }
        }
        Command::Solve { env, beta, horizon } => {
            let mdp = Environment::from_label(&env)?.build(horizon)?;
            let params = RiskParams64::new(beta, horizon)?;
            let (table, _) = optimal_values(&mdp, &params)?;
            let s1 = mdp.initial_state();
            let optimal: Vec<String> = (0..mdp.num_actions())
                .filter(|&a| table.is_greedy(1, s1, a))
                .map(|a| format!("a{}", a + 1))
                .collect();
            writeln!(stdout, "V*_1(S{}) = {}", s1 + 1, table.v(1, s1)).map_err(out_err)?;
            if optimal.len() == 1 {
                writeln!(stdout, "optimal first action: {}", optimal[0]).map_err(out_err)?;
            } else {
                writeln!(
                    stdout,
                    "optimal first action: {} (tied: {})",
                    optimal[0],
                    optimal.join(", ")
                )
                .map_err(out_err)?;
            }
        }
        Command::GenData {
            env,
            horizon,
            k,
            seed,
            policy,
            out,
        } => {
            let mdp = Environment::from_label(&env)?.build(horizon)?;
            let behavior = match policy {
                BehaviorPolicy::Uniform => uniform_policy(&mdp),
                BehaviorPolicy::AlwaysA1 => StochasticPolicy::constant(&mdp, 0)?,
                BehaviorPolicy::AlwaysA2 => StochasticPolicy::constant(&mdp, 1)?,
            };
            if k == 0 {
                return Err(HarnessError::Validation("--K must be at least 1".into()));
            }
            let data = generate_dataset(&mdp, &behavior, k, seed)?;
            save_dataset(&data, &out).map_err(|e| HarnessError::dataset(&out, e))?;
            writeln!(stdout, "wrote {k} trajectories to {}", out.display()).map_err(out_err)?;
        }
        Command::SplitData {
            input,
            seed,
            aux,
            main,
        } => {
            let data: OfflineDataset64 =
                load_dataset(&input).map_err(|e| HarnessError::dataset(&input, e))?;
            if data.len() < 2 {
                return Err(HarnessError::Validation(
                    "splitting needs at least 2 trajectories".into(),
                ));
            }
            let (aux_idx, main_idx) =
                split_indices(data.len(), &mut ChaCha8Rng::seed_from_u64(seed));
            for (idx, path, tag) in [(&aux_idx, &aux, "aux"), (&main_idx, &main, "main")] {
                let part = OfflineDataset64::new(
                    data.horizon(),
                    idx.iter()
                        .map(|&i| data.trajectories()[i].clone())
                        .collect(),
                    Provenance {
                        seed: data.provenance().seed,
                        policy_id: format!("{}/{tag}", data.provenance().policy_id),
                    },
                )?;
                save_dataset(&part, path).map_err(|e| HarnessError::dataset(path, e))?;
            }
            writeln!(
                stdout,
                "aux: {} trajectories, main: {} trajectories",
                aux_idx.len(),
                main_idx.len()
            )
            .map_err(out_err)?;
        }
        Command::Summarize { csv, out, svg } => {
            let rows = read_results(&csv)?;
            let summary = summarize(&rows);
            match out {
                Some(path) => emit_csv(&summary, &path)?,
                None => write_csv(&summary, &mut *stdout)
                    .map_err(|e| HarnessError::csv("<stdout>", e))?,
            }
            if let Some(path) = svg {
                emit_plot(&summary, &path)?;
            }
        }
    }
    Ok(())
}
