//! TSCH timing, the round-robin schedule function (RRSF), per-slot delivery
//! with collision semantics, and a simplified network-join process.

use rand::Rng;
use serde::Serialize;

use crate::error::ConfigError;
use crate::propagation::{LinkCache, LinkModel};
use crate::vec2::Vec2;
use crate::world::AgentState;

pub type Asn = u64;

pub const DEFAULT_SLOT_DURATION: f64 = 0.01;
pub const DEFAULT_JOIN_TIMEOUT: Asn = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Slotframe {
    /// Slots per frame; RRSF uses one slot per agent.
    pub length: usize,
    /// Seconds per slot.
    pub slot_duration: f64,
    pub hopping_sequence: Vec<u8>,
    pub channel_offset: u64,
}

impl Slotframe {
    pub fn rrsf(n_agents: usize) -> Self {
        Self {
            length: n_agents,
            slot_duration: DEFAULT_SLOT_DURATION,
            hopping_sequence: (0..16).collect(),
            channel_offset: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.length < 1 {
            return Err(ConfigError::new("mac slotframe length must be at least 1"));
        }
        if !(self.slot_duration > 0.0) {
            return Err(ConfigError::new(format!(
                "mac.slot_duration ({}) must be positive",
                self.slot_duration
            )));
        }
        if self.hopping_sequence.is_empty() {
            return Err(ConfigError::new("mac.hopping_sequence must not be empty"));
        }
        let mut seen = [false; 256];
        for &c in &self.hopping_sequence {
            if std::mem::replace(&mut seen[c as usize], true) {
                return Err(ConfigError::new(format!(
                    "mac.hopping_sequence repeats channel {c}"
                )));
            }
        }
        Ok(())
    }

    pub fn channel(&self, asn: Asn) -> u8 {
        let len = self.hopping_sequence.len() as u64;
        self.hopping_sequence[(asn.wrapping_add(self.channel_offset) % len) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAssignment {
    pub asn: Asn,
    pub tx: Vec<usize>,
    pub rx: Vec<usize>,
    pub channel: u8,
}

/// One agent transmits per slot, cycling through all `n` agents; everyone else listens.
pub fn rrsf_assignment(n: usize, asn: Asn, slotframe: &Slotframe) -> SlotAssignment {
    let sender = (asn % n as u64) as usize;
    SlotAssignment {
        asn,
        tx: vec![sender],
        rx: (0..n).filter(|&i| i != sender).collect(),
        channel: slotframe.channel(asn),
    }
}

/// Position broadcast carried by every transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub src: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    pub asn: Asn,
}

impl Packet {
    pub fn from_agent(agent: &AgentState, asn: Asn) -> Self {
        Self {
            src: agent.id,
            position: agent.position,
            velocity: agent.velocity,
            asn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Delivered,
    /// The Bernoulli draw on the link PDR failed.
    Lost,
    /// Another audible transmitter shared the slot.
    Collision,
}

/// One attempted reception. Also the row format of the delivery log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reception {
    pub asn: Asn,
    pub src: usize,
    pub dst: usize,
    pub outcome: Outcome,
    pub rssi: f64,
    pub pdr: f64,
    pub channel: u8,
}

impl Reception {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::Delivered
    }
}

#[derive(Debug, Clone, Default)]
pub struct SlotResult {
    /// Every attempted reception, in (dst, src) order.
    pub receptions: Vec<Reception>,
    pub delivered: Vec<(usize, Packet)>,
}

/// Resolve one slot: every listening receiver tries to hear each transmitter.
///
/// A receiver with two or more audible transmitters (PDR > 0) hears nothing.
/// With exactly one, delivery is an independent Bernoulli draw on that link's
/// PDR. `listening[d]` is false for receivers tuned to another channel; they
/// take no part in the slot. Link evaluation draws from `link_rng`, delivery
/// draws from `delivery_rng`.
pub fn deliver_slot<L: Rng + ?Sized, D: Rng + ?Sized>(
    assignment: &SlotAssignment,
    agents: &[AgentState],
    links: &mut LinkCache,
    model: &LinkModel,
    listening: &[bool],
    link_rng: &mut L,
    delivery_rng: &mut D,
) -> SlotResult {
    let mut out = SlotResult::default();
    let mut heard = Vec::with_capacity(assignment.tx.len());
    for &dst in &assignment.rx {
        if !listening[dst] {
            continue;
        }
        heard.clear();
        for &src in &assignment.tx {
            let link = links.evaluate(
                model,
                src,
                dst,
                agents[src].position,
                agents[dst].position,
                link_rng,
            );
            heard.push((src, link.rssi, link.pdr));
        }
        let audible = heard.iter().filter(|&&(_, _, pdr)| pdr > 0.0).count();
        for &(src, rssi, pdr) in &heard {
            let outcome = if pdr <= 0.0 {
                Outcome::Lost
            } else if audible >= 2 {
                Outcome::Collision
            } else if bernoulli(pdr, delivery_rng) {
                Outcome::Delivered
            } else {
                Outcome::Lost
            };
            if outcome == Outcome::Delivered {
                out.delivered
                    .push((dst, Packet::from_agent(&agents[src], assignment.asn)));
            }
            out.receptions.push(Reception {
                asn: assignment.asn,
                src,
                dst,
                outcome,
                rssi,
                pdr,
                channel: assignment.channel,
            });
        }
    }
    out
}

/// Bernoulli draw; degenerate probabilities consume no randomness.
pub(crate) fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.gen::<f64>() < p
    }
}

/// Which agents have joined the network, rooted at agent 0.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinState {
    pub joined: Vec<bool>,
    pub root: usize,
    pub formation_asn: Option<Asn>,
    n_joined: usize,
}

impl JoinState {
    pub fn new(n: usize) -> Self {
        let mut joined = vec![false; n];
        joined[0] = true;
        Self {
            joined,
            root: 0,
            formation_asn: (n == 1).then_some(0),
            n_joined: 1,
        }
    }

    /// Everyone joined from the start (no network phase).
    pub fn all_joined(n: usize) -> Self {
        Self {
            joined: vec![true; n],
            root: 0,
            formation_asn: Some(0),
            n_joined: n,
        }
    }

    pub fn is_joined(&self, id: usize) -> bool {
        self.joined[id]
    }

    pub fn joined_count(&self) -> usize {
        self.n_joined
    }

    /// Receiver tuning for a slot on `channel`. Joined agents follow the
    /// hopping sequence; with `scan` set, unjoined agents listen on a channel
    /// drawn uniformly from `hopping_sequence` and miss the slot unless it matches.
    pub fn listening<R: Rng + ?Sized>(
        &self,
        channel: u8,
        hopping_sequence: &[u8],
        scan: bool,
        rng: &mut R,
    ) -> Vec<bool> {
        self.joined
            .iter()
            .map(|&j| {
                j || !scan || hopping_sequence[rng.gen_range(0..hopping_sequence.len())] == channel
            })
            .collect()
    }
}

/// Admit every unjoined agent that received a packet from a joined agent.
pub fn join_step(state: &mut JoinState, receptions: &[Reception], asn: Asn) -> Vec<usize> {
    let mut newly = Vec::new();
    for r in receptions {
        if r.success() && state.joined[r.src] && !state.joined[r.dst] {
            newly.push(r.dst);
        }
    }
    // Admission uses the joined set from the start of the slot.
    for &d in &newly {
        if !state.joined[d] {
            state.joined[d] = true;
            state.n_joined += 1;
        }
    }
    newly.sort_unstable();
    newly.dedup();
    if state.formation_asn.is_none() && state.n_joined == state.joined.len() {
        state.formation_asn = Some(asn);
    }
    newly
}

pub fn network_formed(state: &JoinState) -> bool {
    state.formation_asn.is_some()
}

/// True once `asn` reaches the join timeout without every agent joined.
pub fn formation_failed(state: &JoinState, asn: Asn, timeout: Asn) -> bool {
    !network_formed(state) && asn >= timeout
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::LinkVariant;
    use crate::world::spawn_line;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rngs() -> (ChaCha8Rng, ChaCha8Rng) {
        (ChaCha8Rng::seed_from_u64(1), ChaCha8Rng::seed_from_u64(2))
    }

    #[test]
    fn rrsf_examples() {
        let sf = Slotframe::rrsf(4);
        let a = rrsf_assignment(4, 0, &sf);
        assert_eq!(a.tx, vec![0]);
        assert_eq!(a.rx, vec![1, 2, 3]);
        assert_eq!(rrsf_assignment(4, 6, &sf).tx, vec![2]);
        let one = rrsf_assignment(1, 17, &Slotframe::rrsf(1));
        assert_eq!(one.tx, vec![0]);
        assert!(one.rx.is_empty());
    }

    #[test]
    fn channel_hops_with_offset() {
        let mut sf = Slotframe::rrsf(4);
        sf.channel_offset = 3;
        assert_eq!(rrsf_assignment(4, 0, &sf).channel, 3);
        assert_eq!(rrsf_assignment(4, 13, &sf).channel, 0);
        // Same slot-in-frame repeats its channel every 16 frames when gcd(4,16)=4.
        for asn in 0..200u64 {
            assert_eq!(sf.channel(asn), sf.channel(asn + 16));
        }
    }

    #[test]
    fn slotframe_validation() {
        let mut sf = Slotframe::rrsf(3);
        assert!(sf.validate().is_ok());
        sf.hopping_sequence = vec![1, 2, 1];
        assert!(sf.validate().is_err());
        sf.hopping_sequence.clear();
        assert!(sf.validate().is_err());
    }

    fn run_slot(
        model: LinkModel,
        assignment: &SlotAssignment,
        agents: &[AgentState],
    ) -> SlotResult {
        let mut cache = LinkCache::new(agents.len(), &model);
        let (mut l, mut d) = rngs();
        let listening = vec![true; agents.len()];
        deliver_slot(
            assignment, agents, &mut cache, &model, &listening, &mut l, &mut d,
        )
    }

    #[test]
    fn certain_and_impossible_links() {
        let agents = spawn_line(2, 2.0).unwrap();
        let sf = Slotframe::rrsf(2);
        let a = rrsf_assignment(2, 0, &sf);
        let ok = run_slot(LinkModel::new(LinkVariant::FullConnectivity), &a, &agents);
        assert_eq!(ok.delivered.len(), 1);
        assert_eq!(ok.receptions[0].outcome, Outcome::Delivered);
        assert_eq!(ok.delivered[0].1.position, agents[0].position);

        let none = run_slot(
            LinkModel::new(LinkVariant::UnitDisk { radius: 1.0 }),
            &a,
            &agents,
        );
        assert!(none.delivered.is_empty());
        assert_eq!(none.receptions[0].outcome, Outcome::Lost);
    }

    #[test]
    fn concurrent_audible_transmitters_collide() {
        let agents = spawn_line(3, 2.0).unwrap();
        let a = SlotAssignment {
            asn: 5,
            tx: vec![0, 2],
            rx: vec![1],
            channel: 0,
        };
        let res = run_slot(LinkModel::new(LinkVariant::FullConnectivity), &a, &agents);
        assert!(res.delivered.is_empty());
        assert_eq!(res.receptions.len(), 2);
        assert!(res
            .receptions
            .iter()
            .all(|r| r.outcome == Outcome::Collision));

        // Only one of the two is in range: no collision.
        let res = run_slot(
            LinkModel::new(LinkVariant::UnitDisk { radius: 2.5 }),
            &a,
            &{
                let mut far = agents.clone();
                far[2].position = Vec2::new(50.0, 0.0);
                far
            },
        );
        assert_eq!(res.delivered.len(), 1);
        assert_eq!(res.delivered[0].1.src, 0);
    }

    #[test]
    fn off_channel_receivers_are_skipped() {
        let agents = spawn_line(3, 1.0).unwrap();
        let model = LinkModel::new(LinkVariant::FullConnectivity);
        let mut cache = LinkCache::new(3, &model);
        let (mut l, mut d) = rngs();
        let a = rrsf_assignment(3, 0, &Slotframe::rrsf(3));
        let res = deliver_slot(
            &a,
            &agents,
            &mut cache,
            &model,
            &[true, false, true],
            &mut l,
            &mut d,
        );
        assert_eq!(res.receptions.len(), 1);
        assert_eq!(res.receptions[0].dst, 2);
    }

    #[test]
    fn join_examples() {
        let single = JoinState::new(1);
        assert!(network_formed(&single));
        assert_eq!(single.formation_asn, Some(0));

        // n = 2, pdr = 1: agent 1 joins in slot 0, when the root transmits.
        let agents = spawn_line(2, 2.0).unwrap();
        let model = LinkModel::new(LinkVariant::UnitDisk { radius: 10.0 });
        let sf = Slotframe::rrsf(2);
        let mut js = JoinState::new(2);
        let res = run_slot(model.clone(), &rrsf_assignment(2, 0, &sf), &agents);
        assert_eq!(join_step(&mut js, &res.receptions, 0), vec![1]);
        assert_eq!(js.formation_asn, Some(0));

        // pdr = 0: never forms.
        let far = spawn_line(2, 20.0).unwrap();
        let mut js = JoinState::new(2);
        for asn in 0..100 {
            let res = run_slot(model.clone(), &rrsf_assignment(2, asn, &sf), &far);
            join_step(&mut js, &res.receptions, asn);
        }
        assert!(!network_formed(&js));
        assert!(formation_failed(&js, 100, 100));
        assert!(!formation_failed(&js, 99, 100));
    }

    #[test]
    fn packets_from_unjoined_agents_do_not_admit() {
        let mut js = JoinState::new(3);
        let r = Reception {
            asn: 1,
            src: 1,
            dst: 2,
            outcome: Outcome::Delivered,
            rssi: -50.0,
            pdr: 1.0,
            channel: 0,
        };
        assert!(join_step(&mut js, &[r], 1).is_empty());
        assert_eq!(js.joined, vec![true, false, false]);
        assert!(!network_formed(&js));
    }

    #[test]
    fn scanning_receivers_sometimes_miss() {
        let js = JoinState::new(50);
        let hop: Vec<u8> = (0..16).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tuned = js.listening(3, &hop, true, &mut rng);
        assert!(tuned[0]);
        let hits = tuned[1..].iter().filter(|&&t| t).count();
        assert!(hits < 49);
        assert!(js.listening(3, &hop, false, &mut rng).iter().all(|&t| t));
    }
}
