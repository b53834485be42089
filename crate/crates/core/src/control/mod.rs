//! Decentralized controllers. Every controller sees only the agent's own
//! state and its belief about neighbors.

pub mod belief;
pub mod flocking;
pub mod formation;
pub mod potential;

pub use belief::{update_belief, BeliefError, BeliefState, Neighbor};
pub use flocking::{
    emergent_flock_control, flock_control, Alignment, FlockParams, FlockVariant, PotentialKind,
};
pub use formation::{formation_control, local_line_fit, FormationParams, Line};
pub use potential::{
    original_potential_gradient, potential_gradient, PotentialConstants, Singularity,
};

use crate::error::ConfigError;
use crate::vec2::Vec2;
use crate::world::AgentState;

/// When agents recompute their velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlTiming {
    /// Whenever the agent receives a packet.
    PerPacket,
    /// Once per slotframe.
    PerSlotframe,
    EveryKSlots(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Flock(FlockParams),
    Formation(FormationParams),
}

impl Controller {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            Controller::Flock(p) => p.validate(),
            Controller::Formation(p) => {
                if !(p.gain > 0.0) {
                    return Err(ConfigError::new(format!(
                        "controller.gain ({}) must be positive",
                        p.gain
                    )));
                }
                if !(p.stop_epsilon >= 0.0) {
                    return Err(ConfigError::new(format!(
                        "controller.stop_epsilon ({}) must be non-negative",
                        p.stop_epsilon
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn command(&self, belief: &BeliefState, me: &AgentState) -> Result<Vec2, Singularity> {
        match self {
            Controller::Flock(p) => match p.variant {
                FlockVariant::LeaderFollower => flock_control(belief, me, p),
                FlockVariant::Emergent => emergent_flock_control(belief, me, p),
            },
            Controller::Formation(p) => Ok(formation_control(belief, me, p)),
        }
    }

    /// Reference direction for flock-speed metrics, if any.
    pub fn leader_direction(&self) -> Option<Vec2> {
        match self {
            Controller::Flock(p) => Some(p.leader_direction),
            Controller::Formation(_) => None,
        }
    }
}
