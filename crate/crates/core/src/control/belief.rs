//! Per-agent record of neighbor state, built only from received packets.

use thiserror::Error;

use crate::mac::{Asn, Packet};
use crate::vec2::Vec2;
use crate::world::LEADER_ID;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub position: Vec2,
    pub velocity: Vec2,
    pub last_heard: Asn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BeliefError {
    #[error("agent {0} cannot receive its own packet")]
    OwnPacket(usize),
    #[error("packet stamped {packet_asn} cannot be received at slot {now}")]
    FromFuture { packet_asn: Asn, now: Asn },
    #[error("packet from unknown agent {0}")]
    UnknownSender(usize),
}

/// Neighbor table indexed by agent id.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub owner: usize,
    slots: Vec<Option<Neighbor>>,
    len: usize,
    pub leader_velocity: Option<Vec2>,
}

impl BeliefState {
    pub fn new(owner: usize, n_agents: usize) -> Self {
        Self {
            owner,
            slots: vec![None; n_agents],
            len: 0,
            leader_velocity: None,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, id: usize) -> Option<&Neighbor> {
        self.slots.get(id).and_then(Option::as_ref)
    }

    /// Known neighbors in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Neighbor)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(id, n)| n.as_ref().map(|n| (id, n)))
    }

    /// Record `packet` as received at slot `now`.
    ///
    /// Rejects the owner's own packets and packets stamped after `now`.
    pub fn update(&mut self, packet: &Packet, now: Asn) -> Result<(), BeliefError> {
        if packet.src == self.owner {
            return Err(BeliefError::OwnPacket(packet.src));
        }
        if packet.asn > now {
            return Err(BeliefError::FromFuture {
                packet_asn: packet.asn,
                now,
            });
        }
        let slot = self
            .slots
            .get_mut(packet.src)
            .ok_or(BeliefError::UnknownSender(packet.src))?;
        if slot.is_none() {
            self.len += 1;
        }
        *slot = Some(Neighbor {
            position: packet.position,
            velocity: packet.velocity,
            last_heard: now,
        });
        if packet.src == LEADER_ID {
            self.leader_velocity = Some(packet.velocity);
        }
        Ok(())
    }

    /// Drop entries not refreshed within `max_age` slots of `now`.
    pub fn prune(&mut self, now: Asn, max_age: Asn) {
        for (id, slot) in self.slots.iter_mut().enumerate() {
            if let Some(n) = slot {
                if now.saturating_sub(n.last_heard) > max_age {
                    *slot = None;
                    self.len -= 1;
                    if id == LEADER_ID {
                        self.leader_velocity = None;
                    }
                }
            }
        }
    }
}

/// Functional form of [`BeliefState::update`].
pub fn update_belief(
    mut belief: BeliefState,
    packet: &Packet,
    now: Asn,
) -> Result<BeliefState, BeliefError> {
    belief.update(packet, now)?;
    Ok(belief)
}
