//! Trial and batch orchestration plus trace/summary emission.
//!
//! Output layout for a batch written to `DIR`:
//!
//! ```text
//! DIR/config.toml                 resolved configuration
//! DIR/trials.jsonl                one summary record per trial, in trial order
//! DIR/batch.json                  across-trial statistics
//! DIR/trial_NNNN/trace.csv        step,agent,x,y,vx,vy
//! DIR/trial_NNNN/deliveries.csv   asn,src,dst,success,rssi,channel,pdr,outcome
//! DIR/trial_NNNN/summary.json
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigFile, ExperimentConfig, Mode};
use crate::error::Result;
use crate::metrics::{
    convergence_time, flock_speed, network_stats, residual_error, Stats, TrialTrace,
};
use crate::sim::Simulation;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "SWARMNET_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub mode: Mode,
    pub link_model: &'static str,
    pub n_agents: usize,
    pub steps: u64,
    /// Mean flock speed along the leader direction (flocking controllers only).
    pub flock_speed: Option<f64>,
    pub flock_failed: bool,
    /// Log SSE of the final positions about their least-squares line.
    pub formation_residual: Option<f64>,
    pub residual_axes_swapped: bool,
    /// Steps after control started until every agent stopped; `None` if never.
    pub convergence_steps: Option<u64>,
    /// Slot at which the last agent joined; `None` in propagation-only mode or on failure.
    pub network_formation_steps: Option<u64>,
    /// `None` in propagation-only mode.
    pub network_formed: Option<bool>,
    pub mean_link_pdr: Option<f64>,
    pub attempts: u64,
    pub successes: u64,
    pub collisions: u64,
    pub singularities: u64,
}

/// Run one trial to the horizon, recording every step.
pub fn run_trial(cfg: &ExperimentConfig, trial_index: usize) -> (TrialTrace, TrialSummary) {
    let mut sim = Simulation::new(cfg, trial_index as u64);
    let n = cfg.world.n_agents;
    let mut trace = TrialTrace::new(n, sim.seed());
    trace.config_echo = cfg.source.to_toml_string();
    for step in 0..cfg.horizon {
        let events = sim.step();
        if events.controlled && trace.first_control_step.is_none() {
            trace.first_control_step = Some(step as usize);
        }
        for &id in &events.joined {
            trace.join_events.push((step, id));
        }
        if cfg.trace_deliveries {
            trace.deliveries.extend(events.receptions);
        }
        trace.push_step(sim.agents().iter().map(|a| (a.position, a.velocity)));
    }
    trace.formation_asn = sim.join_state().formation_asn;
    let summary = summarize(cfg, trial_index, &trace, &sim);
    (trace, summary)
}

fn summarize(
    cfg: &ExperimentConfig,
    trial: usize,
    trace: &TrialTrace,
    sim: &Simulation,
) -> TrialSummary {
    let counters = sim.counters();
    let flock = cfg
        .controller
        .leader_direction()
        .map(|dir| flock_speed(trace, dir));
    let residual = trace.final_positions().and_then(|p| residual_error(p).ok());
    let formed = sim.join_state().formation_asn;
    TrialSummary {
        trial,
        seed: sim.seed(),
        mode: cfg.mode,
        link_model: cfg.link_model.variant.name(),
        n_agents: cfg.world.n_agents,
        steps: cfg.horizon,
        flock_speed: flock.map(|f| f.mean),
        flock_failed: flock.is_some_and(|f| f.failed),
        formation_residual: residual.map(|r| r.log_sse),
        residual_axes_swapped: residual.is_some_and(|r| r.axes_swapped),
        convergence_steps: convergence_time(trace, cfg.speed_epsilon, cfg.hold_steps)
            .map(|s| s as u64),
        network_formation_steps: match cfg.mode {
            Mode::FullNetwork => formed,
            Mode::PropagationOnly => None,
        },
        network_formed: match cfg.mode {
            Mode::FullNetwork => Some(formed.is_some()),
            Mode::PropagationOnly => None,
        },
        mean_link_pdr: (counters.attempts > 0)
            .then(|| counters.successes as f64 / counters.attempts as f64),
        attempts: counters.attempts,
        successes: counters.successes,
        collisions: counters.collisions,
        singularities: sim.singularities(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub trials: usize,
    pub flock_speed: Option<Stats>,
    pub flock_failures: usize,
    pub formation_residual: Option<Stats>,
    /// Trials that never converged count as the horizon.
    pub convergence_steps: Option<Stats>,
    pub convergence_failures: usize,
    /// Trials whose network never formed count as the horizon.
    pub network_formation_steps: Option<Stats>,
    pub formation_failures: usize,
    pub mean_link_pdr: Option<Stats>,
    pub collisions: u64,
}

impl BatchSummary {
    pub fn from_trials(trials: &[TrialSummary], horizon: u64) -> Self {
        let collect = |f: &dyn Fn(&TrialSummary) -> Option<f64>| -> Vec<f64> {
            trials.iter().filter_map(f).collect()
        };
        let network: Vec<&TrialSummary> = trials
            .iter()
            .filter(|t| t.network_formed.is_some())
            .collect();
        BatchSummary {
            trials: trials.len(),
            flock_speed: Stats::of(&collect(&|t| t.flock_speed)),
            flock_failures: trials.iter().filter(|t| t.flock_failed).count(),
            formation_residual: Stats::of(&collect(&|t| t.formation_residual)),
            convergence_steps: Stats::of(&collect(&|t| {
                Some(t.convergence_steps.unwrap_or(horizon) as f64)
            })),
            convergence_failures: trials
                .iter()
                .filter(|t| t.convergence_steps.is_none())
                .count(),
            network_formation_steps: Stats::of(
                &network
                    .iter()
                    .map(|t| t.network_formation_steps.unwrap_or(horizon) as f64)
                    .collect::<Vec<_>>(),
            ),
            formation_failures: network
                .iter()
                .filter(|t| t.network_formed == Some(false))
                .count(),
            mean_link_pdr: Stats::of(&collect(&|t| t.mean_link_pdr)),
            collisions: trials.iter().map(|t| t.collisions).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub trials: Vec<TrialSummary>,
    pub summary: BatchSummary,
}

/// Run every trial in memory; traces are discarded after summarizing.
pub fn run_batch(cfg: &ExperimentConfig) -> BatchResult {
    let trials: Vec<TrialSummary> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i).1)
        .collect();
    let summary = BatchSummary::from_trials(&trials, cfg.horizon);
    BatchResult { trials, summary }
}

/// Run every trial and write the batch layout under `dir`.
pub fn run_batch_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<BatchResult> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.source.to_toml_string())?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| -> Result<TrialSummary> {
            let (trace, summary) = run_trial(cfg, i);
            let trial_dir = dir.join(format!("trial_{i:04}"));
            fs::create_dir_all(&trial_dir)?;
            write_trace_csv(&trace, &trial_dir.join("trace.csv"))?;
            if cfg.trace_deliveries {
                write_deliveries_csv(&trace, &trial_dir.join("deliveries.csv"))?;
            }
            let mut json = serde_json::to_string_pretty(&summary)?;
            json.push('\n');
            fs::write(trial_dir.join("summary.json"), json)?;
            Ok(summary)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = BufWriter::new(File::create(dir.join("trials.jsonl"))?);
    for t in &trials {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;

    let summary = BatchSummary::from_trials(&trials, cfg.horizon);
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(dir.join("batch.json"), json)?;
    Ok(BatchResult { trials, summary })
}

pub fn write_trace_csv(trace: &TrialTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "agent", "x", "y", "vx", "vy"])?;
    for step in 0..trace.steps() {
        let pos = trace.positions_at(step);
        let vel = trace.velocities_at(step);
        for (id, (p, v)) in pos.iter().zip(vel).enumerate() {
            w.write_record(&[
                step.to_string(),
                id.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                v.x.to_string(),
                v.y.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_deliveries_csv(trace: &TrialTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "asn", "src", "dst", "success", "rssi", "channel", "pdr", "outcome",
    ])?;
    for r in &trace.deliveries {
        let outcome = match r.outcome {
            crate::mac::Outcome::Delivered => "delivered",
            crate::mac::Outcome::Lost => "lost",
            crate::mac::Outcome::Collision => "collision",
        };
        w.write_record(&[
            r.asn.to_string(),
            r.src.to_string(),
            r.dst.to_string(),
            u8::from(r.success()).to_string(),
            r.rssi.to_string(),
            r.channel.to_string(),
            r.pdr.to_string(),
            outcome.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-link statistics for a recorded trial.
pub fn trial_network_stats(trace: &TrialTrace) -> crate::metrics::NetworkStats {
    network_stats(&trace.deliveries, trace.formation_asn)
}

/// Output directory: explicit override, then the environment, then the config.
pub fn resolve_output_dir(cfg: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(&cfg.output_dir),
    }
}

/// Directory name for one sweep point.
pub fn sweep_dir_name(param: &str, value: &str) -> String {
    let clean: String = value
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{param}={clean}")
}

/// Run one batch per value of `param`, each under `out/<param>=<value>/`.
pub fn run_sweep(
    base: &ConfigFile,
    param: &str,
    values: &[String],
    out: &Path,
) -> Result<Vec<(String, BatchResult)>> {
    // Validate every point before running any of them.
    let configs = values
        .iter()
        .map(|v| -> Result<(String, ExperimentConfig)> {
            let mut file = base.clone();
            file.set(param, v)?;
            Ok((v.clone(), file.resolve()?))
        })
        .collect::<Result<Vec<_>>>()?;
    configs
        .into_iter()
        .map(|(v, cfg)| {
            let dir = out.join(sweep_dir_name(param, &v));
            Ok((v, run_batch_to_dir(&cfg, &dir)?))
        })
        .collect()
}
