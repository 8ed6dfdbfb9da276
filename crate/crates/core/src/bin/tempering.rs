use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tempering::config::{ExperimentConfig, ENV_PREFIX};
use tempering::runner::{self, Overrides};

#[derive(Parser)]
#[command(version, about = "Simulated tempering and infinite-switching samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true, env = "TEMPERING_CONFIG")]
    config: Option<PathBuf>,

    /// Overrides dynamics.seed.
    #[arg(long, global = true, env = "TEMPERING_SEED")]
    seed: Option<u64>,

    /// Overrides output.dir.
    #[arg(long, global = true, env = "TEMPERING_OUT")]
    out: Option<PathBuf>,

    /// Independent replicas for `run`, each on its own noise stream.
    #[arg(long, global = true, default_value_t = 1, env = "TEMPERING_REPLICAS")]
    replicas: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate a trajectory and write trajectory, summary, AV and histogram CSVs.
    Run,
    /// Estimate ladder weights iteratively and write a ladder file.
    Adapt,
    /// Evaluate large-deviation rate functionals on a grid.
    Ldp,
    /// Quadrature partition functions, mean energies and densities.
    Reference,
}

fn load(cli: &Cli) -> tempering::Result<ExperimentConfig> {
    let overrides = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX));
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path, overrides)?,
        None => {
            let mut table = toml::Table::new();
            tempering::config::apply_overrides(&mut table, overrides)?;
            ExperimentConfig::from_toml(&toml::to_string(&table).expect("table serialises"))?
        }
    };
    Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
    }
    .apply(&mut cfg);
    Ok(cfg)
}

fn execute(cli: &Cli) -> tempering::Result<()> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Run => {
            let report = runner::cmd_run(&cfg, cli.replicas)?;
            for rep in &report.replicas {
                for (obs, est) in rep.observables.iter().zip(&rep.averages) {
                    println!("replica {} <{obs}> = {} ± {}", rep.replica, est.value, est.std_error);
                }
            }
        }
        Command::Adapt => {
            let state = runner::cmd_adapt(&cfg)?;
            for rec in &state.history {
                println!("iteration {}: w = {:?}", rec.iteration, rec.proportions);
            }
            println!("ln Z = {:?}", state.log_z);
        }
        Command::Ldp => {
            let rows = runner::cmd_ldp(&cfg)?;
            println!("{} rows written to {}", rows.len(), cfg.output.dir.join("ldp.csv").display());
        }
        Command::Reference => {
            let q = runner::cmd_reference(&cfg)?;
            for (k, b) in q.betas.iter().enumerate() {
                println!("beta {b}: ln Z = {}, <V> = {}", q.log_z[k], q.mean_energy[k]);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(hint) = runner::remediation(&e) {
                eprintln!("hint: {hint}");
            }
            ExitCode::FAILURE
        }
    }
}
