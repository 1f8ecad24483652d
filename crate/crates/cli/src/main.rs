use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use daim_cli::concentration::{cmd_verify_concentration, ConcentrationConfig};
use daim_cli::decompose::{cmd_decompose, DecomposeConfig};
use daim_cli::experiment::{cmd_experiment, ExperimentPlan, FULL_TRIALS};
use daim_cli::io::read_json;
use daim_cli::simulate::{cmd_simulate, SimulateConfig};
use daim_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "daim", version, about = "Moment-tensor estimation of discordant and mixture single index models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset; writes CSV plus a `.truth.json` sidecar.
    Simulate(Common),
    /// Estimate components from a dataset CSV.
    Decompose(Common),
    /// Run a Monte Carlo sweep; one CSV row per trial.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Use 100 trials per cell instead of the plan's count.
        #[arg(long)]
        full_trials: bool,
        /// Record measured wall times (output is then not byte-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Measure moment-tensor operator-norm errors over (d, n).
    VerifyConcentration(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output path (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed (overrides the config's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

fn output_path(cli: Option<PathBuf>, config: Option<PathBuf>) -> CliResult<PathBuf> {
    cli.or(config)
        .ok_or_else(|| CliError::Invalid("no output path: pass --out or set `output`".into()))
}

fn set_jobs(jobs: Option<usize>) {
    if let Some(j) = jobs {
        // Ignored if the global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(c) => {
            let mut cfg: SimulateConfig = read_json(&c.config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let out = output_path(c.out, cfg.output.clone())?;
            cmd_simulate(&cfg, &out)?;
            eprintln!("wrote {} ({} rows)", out.display(), cfg.n);
        }
        Command::Decompose(c) => {
            set_jobs(c.jobs);
            let mut cfg: DecomposeConfig = read_json(&c.config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let out = output_path(c.out, cfg.output.clone())?;
            let report = cmd_decompose(&cfg, &out)?;
            for (j, w) in report.result.weights.iter().enumerate() {
                println!("component {j}: weight {w}");
            }
            println!("exhausted={}", report.result.exhausted);
            if let Some(e) = report.matching_error {
                println!("matching_error={e}");
            }
        }
        Command::Experiment {
            common: c,
            full_trials,
            timing,
        } => {
            let mut plan: ExperimentPlan = read_json(&c.config)?;
            if let Some(s) = c.seed {
                plan.base_seed = s;
            }
            if let Some(j) = c.jobs {
                plan.parallelism = j;
            }
            if full_trials {
                plan.trials = FULL_TRIALS;
            }
            plan.record_timing |= timing;
            let out = output_path(c.out, plan.output.clone())?;
            let rows = cmd_experiment(&plan, &out)?;
            eprintln!("wrote {} ({} trials)", out.display(), rows.len());
        }
        Command::VerifyConcentration(c) => {
            let mut cfg: ConcentrationConfig = read_json(&c.config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(j) = c.jobs {
                cfg.parallelism = j;
            }
            let out = output_path(c.out, cfg.output.clone())?;
            let rows = cmd_verify_concentration(&cfg, &out)?;
            eprintln!("wrote {} ({} rows)", out.display(), rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("daim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

