//! Command-line front end: solve tasks, infer dynamics from stored value
//! tables and run the experiment sweeps.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use inverse_bellman::gridworld::{make_empty_grid, sample_reward, RewardSearch};
use inverse_bellman::harness::config::{parse_fig1_config, parse_sweep_config};
use inverse_bellman::harness::persist::{load_mdp, save_mdp};
use inverse_bellman::harness::{
    emit_csv, emit_svg, load_value_table, run_fig1, run_theorem1_sweep, save_value_table, Fig1Config, StoredValueTable,
    SweepConfig,
};
use inverse_bellman::inference::infer_model;
use inverse_bellman::mdp::{perturb_values, state_values, PerturbMode, Selector, ValueIteration};
use inverse_bellman::separability::separability_report;
use inverse_bellman::{Error, Result};

#[derive(Parser)]
#[command(
    name = "inverse-bellman",
    version,
    about = "Recover deterministic dynamics from value functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an empty gridworld MDP with a random state reward.
    Grid {
        #[arg(long, default_value_t = 5)]
        side: usize,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Search for a reward whose optimal values have this minimum gap (within 1%).
        #[arg(long)]
        target_delta: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        max_attempts: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an MDP by value iteration and store the value table.
    Solve {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        epsilon: f64,
        #[arg(long)]
        max_iterations: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add bounded noise to a stored value table.
    Perturb {
        #[arg(long)]
        values: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// `uniform` or `adversarial_pair`.
        #[arg(long, default_value = "uniform")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the minimum value gap of a stored table and its critical precision.
    Gap {
        #[arg(long)]
        values: PathBuf,
    },
    /// Infer the successor of every state-action pair from a stored table.
    Infer {
        #[arg(long)]
        values: PathBuf,
        /// Ground-truth MDP; fills the `true_next` column.
        #[arg(long)]
        mdp: Option<PathBuf>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy-versus-precision curves on gridworld tasks.
    Fig1 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Continuous successor-error sweep.
    Continuous {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Grid {
            side,
            gamma,
            seed,
            target_delta,
            max_attempts,
            out,
        } => {
            let rho = match target_delta {
                Some(delta) => {
                    let found = RewardSearch::new(side, gamma, delta, seed)
                        .max_attempts(max_attempts)
                        .run()?;
                    eprintln!(
                        "accepted sample seed {} after {} attempts, delta = {:e}",
                        found.seed, found.attempts, found.achieved_delta
                    );
                    found.reward
                }
                None => sample_reward(side, seed),
            };
            let mdp = make_empty_grid(side, gamma)?.with_state_reward(&rho)?;
            save_mdp(&out, &mdp)
        }
        Command::Solve {
            mdp,
            epsilon,
            max_iterations,
            out,
        } => {
            let mdp = load_mdp(&mdp)?;
            let mut vi = ValueIteration::new(epsilon);
            if let Some(n) = max_iterations {
                vi = vi.max_iterations(n);
            }
            let (q, report) = vi.solve(&mdp, Selector::Greedy)?;
            eprintln!(
                "{} iterations, certified epsilon {:e}",
                report.iterations, report.certified_epsilon
            );
            save_value_table(&out, &StoredValueTable::from_mdp(q, &mdp)?)
        }
        Command::Perturb {
            values,
            epsilon,
            mode,
            seed,
            out,
        } => {
            let stored = load_value_table(&values)?;
            let mode: PerturbMode = mode.parse()?;
            let table = perturb_values(&stored.table, epsilon, mode, seed)?;
            save_value_table(&out, &StoredValueTable::new(table, stored.gamma, stored.reward)?)
        }
        Command::Gap { values } => {
            let stored = load_value_table(&values)?;
            let v = state_values(&stored.table, Selector::Greedy)?;
            let report = separability_report(&v, stored.gamma)?;
            println!("delta = {:e}", report.delta);
            println!("argpair = [{}, {}]", report.argpair.0, report.argpair.1);
            println!("gamma = {}", report.gamma);
            println!("critical_epsilon = {:e}", report.threshold);
            if let Some(eps) = stored.table.certified_epsilon() {
                println!("certified_epsilon = {eps:e}");
                println!("identifiable = {}", report.identifiable_at(eps));
            }
            Ok(())
        }
        Command::Infer { values, mdp, out } => {
            let stored = load_value_table(&values)?;
            let truth = mdp.as_deref().map(load_mdp).transpose()?;
            let model = infer_model(&stored.table, &stored, Selector::Greedy)?;
            let table = model.to_table(truth.as_ref());
            match out {
                Some(path) => write(&path, &table),
                None => {
                    print!("{table}");
                    Ok(())
                }
            }
        }
        Command::Fig1 { config, out, svg } => {
            let config = match config {
                Some(path) => parse_fig1_config(&read(&path)?)?,
                None => Fig1Config::default(),
            };
            let points = run_fig1(&config)?;
            emit_csv(&points, &out)?;
            if let Some(path) = svg {
                emit_svg(&points, &path)?;
            }
            Ok(())
        }
        Command::Continuous { config, out } => {
            let config = match config {
                Some(path) => parse_sweep_config(&read(&path)?)?,
                None => SweepConfig::default(),
            };
            let batch = run_theorem1_sweep(&config)?;
            eprintln!("{} trials, {} violations", batch.rows.len(), batch.violations);
            write(&out, &batch.to_csv())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
