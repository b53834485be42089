use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swarmnet::harness::{resolve_output_dir, run_batch_to_dir, run_sweep, BatchResult};
use swarmnet::{ConfigFile, Error, ExperimentConfig, Result};

#[derive(Parser)]
#[command(
    name = "swarmnet",
    version,
    about = "Networked swarm simulation harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of trials.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one batch per value of a config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted key, e.g. `controller.r_flock`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config file and report problems.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    ConfigFile::from_toml_str(&text)
}

fn warn(cfg: &ExperimentConfig) {
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
}

fn report(label: &str, dir: &Path, batch: &BatchResult) {
    let s = &batch.summary;
    let median = |st: &Option<swarmnet::metrics::Stats>| {
        st.map_or_else(|| "-".to_string(), |v| format!("{:.4}", v.median))
    };
    println!(
        "{label}: {} trials -> {} | flock_speed {} | residual {} | convergence {} ({} failed) | formation {} ({} failed)",
        s.trials,
        dir.display(),
        median(&s.flock_speed),
        median(&s.formation_residual),
        median(&s.convergence_steps),
        s.convergence_failures,
        median(&s.network_formation_steps),
        s.formation_failures,
    );
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config)?.resolve()?;
            warn(&cfg);
            println!("{}: ok", config.display());
        }
        Command::Run {
            config,
            trials,
            seed,
            out,
        } => {
            let mut file = load(&config)?;
            if let Some(t) = trials {
                file.trials = t;
            }
            if let Some(s) = seed {
                file.master_seed = s;
            }
            let cfg = file.resolve()?;
            warn(&cfg);
            let dir = resolve_output_dir(&cfg, out.as_deref());
            let batch = run_batch_to_dir(&cfg, &dir)?;
            report("run", &dir, &batch);
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let file = load(&config)?;
            let cfg = file.resolve()?;
            warn(&cfg);
            let dir = resolve_output_dir(&cfg, out.as_deref());
            for (value, batch) in run_sweep(&file, &param, &values, &dir)? {
                let sub = dir.join(swarmnet::harness::sweep_dir_name(&param, &value));
                report(&format!("{param}={value}"), &sub, &batch);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_byte(&e))
        }
    }
}

fn exit_byte(e: &Error) -> u8 {
    e.exit_code().clamp(1, 255) as u8
}
