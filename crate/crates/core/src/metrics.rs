//! Evaluation quantities computed from trial traces.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::mac::{Asn, Outcome, Reception};
use crate::vec2::Vec2;

/// Everything recorded during one trial.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialTrace {
    pub n_agents: usize,
    /// Step-major: entry `step * n_agents + id`, recorded after integration.
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    /// First step at which control was active; `None` if it never was.
    pub first_control_step: Option<usize>,
    pub deliveries: Vec<Reception>,
    /// `(asn, agent)` for each agent admitted to the network.
    pub join_events: Vec<(Asn, usize)>,
    pub formation_asn: Option<Asn>,
    pub seed: u64,
    pub config_echo: String,
}

impl TrialTrace {
    pub fn new(n_agents: usize, seed: u64) -> Self {
        Self {
            n_agents,
            seed,
            ..Self::default()
        }
    }

    pub fn steps(&self) -> usize {
        self.positions.len().checked_div(self.n_agents).unwrap_or(0)
    }

    pub fn push_step(&mut self, positions: impl IntoIterator<Item = (Vec2, Vec2)>) {
        for (p, v) in positions {
            self.positions.push(p);
            self.velocities.push(v);
        }
        debug_assert_eq!(self.positions.len() % self.n_agents, 0);
    }

    pub fn positions_at(&self, step: usize) -> &[Vec2] {
        &self.positions[step * self.n_agents..(step + 1) * self.n_agents]
    }

    pub fn velocities_at(&self, step: usize) -> &[Vec2] {
        &self.velocities[step * self.n_agents..(step + 1) * self.n_agents]
    }

    pub fn final_positions(&self) -> Option<&[Vec2]> {
        self.steps().checked_sub(1).map(|s| self.positions_at(s))
    }
}

/// Mean velocity component along `direction`, averaged over agents.
pub fn step_flock_speed(velocities: &[Vec2], direction: Vec2) -> f64 {
    if velocities.is_empty() {
        return 0.0;
    }
    velocities.iter().map(|v| v.dot(direction)).sum::<f64>() / velocities.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlockSpeed {
    /// Time-averaged flock speed, m/s; 0 when the trial never started flocking.
    pub mean: f64,
    pub failed: bool,
}

/// Time average of [`step_flock_speed`] over the steps where control was active.
pub fn flock_speed(trace: &TrialTrace, direction: Vec2) -> FlockSpeed {
    let Some(start) = trace.first_control_step.filter(|&s| s < trace.steps()) else {
        return FlockSpeed {
            mean: 0.0,
            failed: true,
        };
    };
    let steps = start..trace.steps();
    let count = steps.len() as f64;
    let total: f64 = steps
        .map(|s| step_flock_speed(trace.velocities_at(s), direction))
        .sum();
    FlockSpeed {
        mean: total / count,
        failed: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ResidualError {
    #[error("residual needs at least two points, got {0}")]
    TooFewPoints(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    /// Natural log of the y-on-x least-squares SSE, floored at 1e-12.
    pub log_sse: f64,
    /// All x were equal, so the fit was done with the axes swapped.
    pub axes_swapped: bool,
}

pub const SSE_FLOOR: f64 = 1e-12;

fn ols_sse(xs: impl Iterator<Item = (f64, f64)> + Clone) -> Option<f64> {
    let n = xs.clone().count() as f64;
    let (sx, sy) = xs.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = xs.clone().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx).powi(2), b + (x - mx) * (y - my))
    });
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Some(xs.map(|(x, y)| (y - (intercept + slope * x)).powi(2)).sum())
}

/// Log residual of the ordinary least-squares line `y = a0 + a1 x` through `positions`.
pub fn residual_error(positions: &[Vec2]) -> Result<Residual, ResidualError> {
    if positions.len() < 2 {
        return Err(ResidualError::TooFewPoints(positions.len()));
    }
    let yx = positions.iter().map(|p| (p.x, p.y));
    let (sse, axes_swapped) = match ols_sse(yx) {
        Some(sse) => (sse, false),
        // Vertical configuration: regress x on y instead (always exact here).
        None => (
            ols_sse(positions.iter().map(|p| (p.y, p.x))).unwrap_or(0.0),
            true,
        ),
    };
    Ok(Residual {
        log_sse: sse.max(SSE_FLOOR).ln(),
        axes_swapped,
    })
}

/// Steps after the first controlled step until every agent's speed stays
/// below `epsilon` for `hold_steps` consecutive steps, or `None` if that
/// never happens.
pub fn convergence_time(trace: &TrialTrace, epsilon: f64, hold_steps: usize) -> Option<usize> {
    let start = trace.first_control_step?;
    let hold = hold_steps.max(1);
    let mut run = 0;
    for step in start..trace.steps() {
        if trace.velocities_at(step).iter().all(|v| v.norm() < epsilon) {
            run += 1;
            if run == hold {
                return Some(step + 1 - hold - start);
            }
        } else {
            run = 0;
        }
    }
    None
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LinkCount {
    pub attempts: u64,
    pub successes: u64,
}

impl LinkCount {
    pub fn pdr(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.successes as f64 / self.attempts as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkStats {
    /// Keyed by `(src, dst)`.
    pub per_link: BTreeMap<(usize, usize), LinkCount>,
    pub collisions: u64,
    pub formation_asn: Option<Asn>,
}

impl NetworkStats {
    pub fn totals(&self) -> LinkCount {
        self.per_link
            .values()
            .fold(LinkCount::default(), |acc, c| LinkCount {
                attempts: acc.attempts + c.attempts,
                successes: acc.successes + c.successes,
            })
    }
}

/// Per-link empirical PDR and collision count from a delivery log.
pub fn network_stats(log: &[Reception], formation_asn: Option<Asn>) -> NetworkStats {
    let mut stats = NetworkStats {
        formation_asn,
        ..NetworkStats::default()
    };
    for r in log {
        let c = stats.per_link.entry((r.src, r.dst)).or_default();
        c.attempts += 1;
        match r.outcome {
            Outcome::Delivered => c.successes += 1,
            Outcome::Collision => stats.collisions += 1,
            Outcome::Lost => {}
        }
    }
    stats
}

/// Across-trial summary of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (0 for a single value).
    pub std: f64,
    pub mean: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stats {
            median,
            min: sorted[0],
            max: sorted[n - 1],
            std,
            mean,
            count: n,
        })
    }
}
