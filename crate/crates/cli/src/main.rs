use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rodsim_cli::bench::BenchConfig;
use rodsim_cli::commands::{
    bench, export, fling_eval, fling_train, load_config, validate_buckling, validate_michell, BucklingRun, CliError,
    CliResult, EvalOptions, FlingRun, MichellRun,
};

/// Environment variable that caps the worker thread count.
const THREADS_VAR: &str = "RODSIM_THREADS";

#[derive(Parser)]
#[command(name = "rodsim", version, about = "Discrete elastic rod simulation runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the rod model against closed-form results.
    Validate {
        #[command(subcommand)]
        which: Validation,
    },
    /// Time one step with and without elastic forces.
    Bench {
        /// Rod sizes (edges), comma separated.
        #[arg(long, value_delimiter = ',', default_value = "20,30,40,50,60")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 51)]
        repeats: usize,
        /// Steps per timed repetition.
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 50)]
        warmup: usize,
        #[arg(long, default_value = "out/bench")]
        out: PathBuf,
    },
    /// Train or evaluate the fling policy.
    Fling {
        #[command(subcommand)]
        which: Fling,
    },
    /// Convert a recorded trace.
    Export {
        #[arg(long)]
        trace: PathBuf,
        /// csv or obj
        #[arg(long)]
        format: String,
        #[arg(long, default_value = "out/export")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigOut {
    /// JSON configuration; defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Validation {
    /// Envelope of a localized helical buckle.
    Buckling(ConfigOut),
    /// Critical twist of a closed ring.
    Michell(ConfigOut),
}

#[derive(Subcommand)]
enum Fling {
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, default_value = "out/fling")]
        out: PathBuf,
    },
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        episodes: usize,
        /// Seed of the evaluation moduli (and samples with --stochastic).
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Sample actions instead of using the policy mean.
        #[arg(long)]
        stochastic: bool,
        /// Write one trace CSV per episode.
        #[arg(long)]
        export_traces: bool,
        /// Fail (exit 1) below this success rate.
        #[arg(long)]
        min_success: Option<f64>,
        #[arg(long, default_value = "out/fling-eval")]
        out: PathBuf,
    },
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli, argv: Vec<String>) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Validate { which } => {
            let summary = match which {
                Validation::Buckling(a) => {
                    validate_buckling(&load_config::<BucklingRun>(a.config.as_deref())?, &a.out, argv)?
                }
                Validation::Michell(a) => {
                    validate_michell(&load_config::<MichellRun>(a.config.as_deref())?, &a.out, argv)?
                }
            };
            summary.print();
            if !summary.passed {
                return Err(CliError::Gate("validation thresholds not met".into()));
            }
        }
        Command::Bench {
            n,
            repeats,
            steps,
            warmup,
            out,
        } => {
            let cfg = BenchConfig {
                n_values: n,
                repeats,
                steps,
                warmup,
            };
            for r in bench(&cfg, &out, argv)? {
                println!(
                    "n = {:3}: {:.3e} s without, {:.3e} s with elastic forces ({:+.1}%)",
                    r.n, r.time_without, r.time_with, r.overhead_pct
                );
            }
        }
        Command::Fling { which } => match which {
            Fling::Train {
                config,
                episodes,
                batch_size,
                seed,
                resume,
                out,
            } => {
                let mut run_cfg: FlingRun = load_config(config.as_deref())?;
                if let Some(e) = episodes {
                    run_cfg.train.total_episodes = e;
                }
                if let Some(b) = batch_size {
                    run_cfg.train.batch_size = b;
                }
                if let Some(s) = seed {
                    run_cfg.train.seed = s;
                }
                let s = fling_train(&run_cfg, resume.as_deref(), &out, argv)?;
                println!(
                    "{} episodes in {} batches; best evaluation reward {:?}; quartile means {:?} -> {:?}",
                    s.episodes, s.batches, s.best_eval_reward, s.first_quartile_mean, s.final_quartile_mean
                );
            }
            Fling::Eval {
                checkpoint,
                config,
                episodes,
                seed,
                stochastic,
                export_traces,
                min_success,
                out,
            } => {
                let run_cfg: FlingRun = load_config(config.as_deref())?;
                let opts = EvalOptions {
                    episodes,
                    seed,
                    deterministic: !stochastic,
                    export_traces,
                    min_success,
                };
                let s = fling_eval(&run_cfg, &checkpoint, &opts, &out, argv)?;
                println!("success rate {:.3}, mean reward {:.3}", s.success_rate, s.mean_reward);
            }
        },
        Command::Export { trace, format, out } => {
            let path = export(&trace, &format, &out, argv)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
