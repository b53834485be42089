//! The per-trial simulation loop.
//!
//! Full-network mode advances one TSCH slot per step. Each slot runs, in order:
//! control (when due, from beliefs stamped in earlier slots), the RRSF
//! assignment, delivery, belief and join updates, then integration over one
//! slot duration. Agents hold still until the network has formed.
//!
//! Propagation-only mode advances one control period per step: every agent's
//! packet is offered to every other agent, then every agent updates its
//! command and moves.

use crate::config::{ExperimentConfig, Mode};
use crate::control::{BeliefState, ControlTiming};
use crate::mac::{
    bernoulli, deliver_slot, join_step, rrsf_assignment, Asn, JoinState, Outcome, Packet, Reception,
};
use crate::propagation::LinkCache;
use crate::rng::{trial_seed, TrialRngs};
use crate::vec2::Vec2;
use crate::world::{integrate_step, AgentState};

/// Running reception totals, kept even when the full log is not.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeliveryCounters {
    pub attempts: u64,
    pub successes: u64,
    pub collisions: u64,
}

impl DeliveryCounters {
    fn record(&mut self, outcome: Outcome) {
        self.attempts += 1;
        match outcome {
            Outcome::Delivered => self.successes += 1,
            Outcome::Collision => self.collisions += 1,
            Outcome::Lost => {}
        }
    }
}

/// What happened during one step.
#[derive(Debug, Clone, Default)]
pub struct StepEvents {
    pub receptions: Vec<Reception>,
    pub joined: Vec<usize>,
    /// Control was applied during this step.
    pub controlled: bool,
}

pub struct Simulation {
    cfg: ExperimentConfig,
    seed: u64,
    agents: Vec<AgentState>,
    beliefs: Vec<BeliefState>,
    commands: Vec<Vec2>,
    /// Agents that heard a packet since their last update (per-packet timing).
    dirty: Vec<bool>,
    links: LinkCache,
    join: JoinState,
    rngs: TrialRngs,
    step: u64,
    counters: DeliveryCounters,
    singularities: u64,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig, trial_index: u64) -> Self {
        let seed = trial_seed(cfg.master_seed, trial_index);
        let mut rngs = TrialRngs::new(seed);
        let mut world = cfg.world.clone();
        world.rng_seed = seed;
        let agents = world
            .spawn_agents(&mut rngs.spawn)
            .expect("world config was validated");
        let n = agents.len();
        let join = match cfg.mode {
            Mode::FullNetwork => JoinState::new(n),
            Mode::PropagationOnly => JoinState::all_joined(n),
        };
        Self {
            cfg: cfg.clone(),
            seed,
            beliefs: (0..n).map(|i| BeliefState::new(i, n)).collect(),
            commands: vec![Vec2::ZERO; n],
            dirty: vec![true; n],
            links: LinkCache::new(n, &cfg.link_model),
            join,
            rngs,
            step: 0,
            counters: DeliveryCounters::default(),
            singularities: 0,
            agents,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn beliefs(&self) -> &[BeliefState] {
        &self.beliefs
    }

    pub fn join_state(&self) -> &JoinState {
        &self.join
    }

    /// Index of the next step to run (the ASN in full-network mode).
    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn counters(&self) -> DeliveryCounters {
        self.counters
    }

    /// Controller evaluations that hit a potential singularity.
    pub fn singularities(&self) -> u64 {
        self.singularities
    }

    pub fn step(&mut self) -> StepEvents {
        let events = match self.cfg.mode {
            Mode::FullNetwork => self.step_slot(),
            Mode::PropagationOnly => self.step_propagation(),
        };
        self.step += 1;
        events
    }

    fn max_belief_age(&self) -> u64 {
        let frame = match self.cfg.mode {
            Mode::FullNetwork => self.cfg.slotframe.length as u64,
            Mode::PropagationOnly => 1,
        };
        self.cfg.stale_timeout * frame
    }

    fn update_command(&mut self, id: usize) {
        match self
            .cfg
            .controller
            .command(&self.beliefs[id], &self.agents[id])
        {
            Ok(u) => self.commands[id] = u,
            Err(_) => {
                // Surfaced through the trial summary; the agent holds still.
                self.singularities += 1;
                self.commands[id] = Vec2::ZERO;
            }
        }
        self.dirty[id] = false;
    }

    fn control_all(&mut self, now: u64) {
        let age = self.max_belief_age();
        for id in 0..self.agents.len() {
            self.beliefs[id].prune(now, age);
            self.update_command(id);
        }
    }

    fn step_slot(&mut self) -> StepEvents {
        let asn: Asn = self.step;
        let n = self.agents.len();
        let mut events = StepEvents::default();
        let active = self.join.formation_asn.is_some_and(|f| f < asn);
        if active {
            let first = self.join.formation_asn == Some(asn - 1);
            let frame = self.cfg.slotframe.length as u64;
            let due_all = first
                || match self.cfg.control_timing {
                    ControlTiming::PerSlotframe => asn.is_multiple_of(frame),
                    ControlTiming::EveryKSlots(k) => asn.is_multiple_of(k),
                    ControlTiming::PerPacket => false,
                };
            if due_all {
                self.control_all(asn);
            } else if self.cfg.control_timing == ControlTiming::PerPacket {
                let age = self.max_belief_age();
                for id in 0..n {
                    if self.dirty[id] {
                        self.beliefs[id].prune(asn, age);
                        self.update_command(id);
                    }
                }
            }
            events.controlled = true;
        }

        let assignment = rrsf_assignment(n, asn, &self.cfg.slotframe);
        let listening = self.join.listening(
            assignment.channel,
            &self.cfg.slotframe.hopping_sequence,
            self.cfg.join_scan,
            &mut self.rngs.join,
        );
        let result = deliver_slot(
            &assignment,
            &self.agents,
            &mut self.links,
            &self.cfg.link_model,
            &listening,
            &mut self.rngs.link,
            &mut self.rngs.delivery,
        );
        for (dst, packet) in &result.delivered {
            self.beliefs[*dst]
                .update(packet, asn)
                .expect("packets are stamped with the current slot");
            self.dirty[*dst] = true;
        }
        for r in &result.receptions {
            self.counters.record(r.outcome);
        }
        events.joined = join_step(&mut self.join, &result.receptions, asn);
        events.receptions = result.receptions;

        if active {
            integrate_step(
                &mut self.agents,
                &self.commands,
                self.cfg.world.dt,
                self.cfg.world.v_max,
            );
        }
        events
    }

    fn step_propagation(&mut self) -> StepEvents {
        let now = self.step;
        let n = self.agents.len();
        let keep_log = self.cfg.trace_deliveries;
        let mut events = StepEvents::default();
        let packets: Vec<Packet> = self
            .agents
            .iter()
            .map(|a| Packet::from_agent(a, now))
            .collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let link = self.links.evaluate(
                    &self.cfg.link_model,
                    i,
                    j,
                    self.agents[i].position,
                    self.agents[j].position,
                    &mut self.rngs.link,
                );
                for (src, dst) in [(i, j), (j, i)] {
                    let delivered = bernoulli(link.pdr, &mut self.rngs.delivery);
                    let outcome = if delivered {
                        self.beliefs[dst]
                            .update(&packets[src], now)
                            .expect("packets are stamped with the current step");
                        Outcome::Delivered
                    } else {
                        Outcome::Lost
                    };
                    self.counters.record(outcome);
                    if keep_log {
                        events.receptions.push(Reception {
                            asn: now,
                            src,
                            dst,
                            outcome,
                            rssi: link.rssi,
                            pdr: link.pdr,
                            channel: 0,
                        });
                    }
                }
            }
        }

        let due = match self.cfg.control_timing {
            ControlTiming::EveryKSlots(k) => now.is_multiple_of(k),
            ControlTiming::PerPacket | ControlTiming::PerSlotframe => true,
        };
        if due {
            self.control_all(now);
        }
        integrate_step(
            &mut self.agents,
            &self.commands,
            self.cfg.world.dt,
            self.cfg.world.v_max,
        );
        events.controlled = true;
        events
    }
}
