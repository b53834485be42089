//! Leader-follower and emergent flocking controllers.

use crate::error::ConfigError;
use crate::vec2::Vec2;
use crate::world::AgentState;

use super::belief::BeliefState;
use super::potential::{Original, Potential, Singularity, SingularityFree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlockVariant {
    LeaderFollower,
    Emergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    SingularityFree,
    Original,
}

/// How a follower's own velocity enters the leader-alignment term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    /// `v_self` is the command being computed: `u = (w v* - grad) / (1 + w)`.
    Implicit,
    /// `v_self` is the velocity from the previous command. With velocity
    /// commands this feeds back one step and diverges for any `w >= 1`.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlockParams {
    pub r_collision: f64,
    pub r_flock: f64,
    pub leader_speed: f64,
    pub leader_direction: Vec2,
    pub leader_weight: f64,
    pub variant: FlockVariant,
    pub potential: PotentialKind,
    pub alignment: Alignment,
}

impl FlockParams {
    /// Weight on the leader-alignment term: grows by one per ten agents, never below 1.
    pub fn default_leader_weight(n_agents: usize) -> f64 {
        (n_agents as f64 / 10.0).max(1.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.r_collision > 0.0 && self.r_collision < self.r_flock) {
            return Err(ConfigError::new(format!(
                "controller.r_collision ({}) must be positive and below controller.r_flock ({})",
                self.r_collision, self.r_flock
            )));
        }
        if !(self.leader_weight >= 1.0) {
            return Err(ConfigError::new(format!(
                "controller.leader_weight ({}) must be at least 1",
                self.leader_weight
            )));
        }
        if !(self.leader_speed >= 0.0) {
            return Err(ConfigError::new(format!(
                "controller.leader_speed ({}) must be non-negative",
                self.leader_speed
            )));
        }
        if (self.leader_direction.norm() - 1.0).abs() > 1e-9 {
            return Err(ConfigError::new(
                "controller.leader_direction must be a unit vector",
            ));
        }
        Ok(())
    }

    pub fn leader_velocity(&self) -> Vec2 {
        self.leader_direction * self.leader_speed
    }

    pub fn pair_potential(&self) -> Potential {
        match self.potential {
            PotentialKind::SingularityFree => {
                Potential::SingularityFree(SingularityFree::new(self.r_collision, self.r_flock))
            }
            PotentialKind::Original => Potential::Original(Original {
                r_flock: self.r_flock,
            }),
        }
    }
}

fn potential_sum(
    belief: &BeliefState,
    me: &AgentState,
    params: &FlockParams,
) -> Result<Vec2, Singularity> {
    let potential = params.pair_potential();
    belief
        .iter()
        .map(|(_, n)| potential.gradient(me.position, n.position))
        .sum()
}

/// Leader flies the reference velocity. Followers descend the summed pair
/// potential over believed neighbors and, once the leader has been heard,
/// align to its last reported velocity with weight `leader_weight`
/// (see [`Alignment`] for how the follower's own velocity is taken).
pub fn flock_control(
    belief: &BeliefState,
    me: &AgentState,
    params: &FlockParams,
) -> Result<Vec2, Singularity> {
    if me.is_leader() {
        return Ok(params.leader_velocity());
    }
    if belief.is_empty() {
        return Ok(Vec2::ZERO);
    }
    let descent = -potential_sum(belief, me, params)?;
    let w = params.leader_weight;
    Ok(match (belief.leader_velocity, params.alignment) {
        (None, _) => descent,
        (Some(v_leader), Alignment::Implicit) => (descent + v_leader * w) * (1.0 / (1.0 + w)),
        (Some(v_leader), Alignment::Explicit) => descent + (v_leader - me.velocity) * w,
    })
}

/// Velocity consensus plus potential descent over believed neighbors. The
/// leader gets no special treatment.
pub fn emergent_flock_control(
    belief: &BeliefState,
    me: &AgentState,
    params: &FlockParams,
) -> Result<Vec2, Singularity> {
    if belief.is_empty() {
        return Ok(Vec2::ZERO);
    }
    let alignment: Vec2 = belief.iter().map(|(_, n)| me.velocity - n.velocity).sum();
    Ok(-alignment - potential_sum(belief, me, params)?)
}
