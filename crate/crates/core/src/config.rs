//! Experiment configuration: a flat TOML document of typed keys, resolved
//! into validated model types.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected. Keys are addressed by dotted path
//! (`link_model.variant`) for command-line overrides and sweeps.

use serde::{Deserialize, Serialize};

use crate::control::{
    Alignment, ControlTiming, Controller, FlockParams, FlockVariant, FormationParams, PotentialKind,
};
use crate::error::{ConfigError, Error, Result};
use crate::mac::{Asn, Slotframe, DEFAULT_JOIN_TIMEOUT, DEFAULT_SLOT_DURATION};
use crate::propagation::{LinkModel, LinkVariant, PdrCurve, Segment};
use crate::vec2::Vec2;
use crate::world::{Spawn, WorldConfig};

/// Agent count above which full-network runs are flagged as unlikely to form.
pub const FULL_NETWORK_AGENT_WARNING: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FullNetwork,
    PropagationOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingKey {
    PerPacket,
    PerSlotframe,
    EveryKSlots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpawnKey {
    Line,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKey {
    FullConnectivity,
    LineOfSight,
    UnitDisk,
    ProbabilisticDisk,
    ExperimentalRandomness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKey {
    LeaderFollower,
    Emergent,
    Formation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentKey {
    Implicit,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKey {
    SingularityFree,
    Original,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub n_agents: usize,
    pub v_max: f64,
    /// Integration step in seconds; defaults to the slot duration
    /// (full network) or the control period (propagation only).
    pub dt: Option<f64>,
    pub spawn: SpawnKey,
    pub spacing: f64,
    pub density: f64,
}

impl Default for WorldSection {
    fn default() -> Self {
        Self {
            n_agents: 10,
            v_max: 30.0,
            dt: None,
            spawn: SpawnKey::Line,
            spacing: 2.0,
            density: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub variant: VariantKey,
    /// Unit-disk radius, m.
    pub radius: f64,
    pub tx_power: f64,
    pub frequency: f64,
    pub random_loss_max: f64,
    pub resample_displacement: f64,
    pub pdr_floor_dbm: f64,
    pub pdr_ceiling_dbm: f64,
    /// Line-of-sight obstacles as `[x1, y1, x2, y2]` segments.
    pub obstacles: Vec<[f64; 4]>,
}

impl Default for LinkSection {
    fn default() -> Self {
        let curve = PdrCurve::default();
        Self {
            variant: VariantKey::FullConnectivity,
            radius: 10.0,
            tx_power: 0.0,
            frequency: 2.4e9,
            random_loss_max: 40.0,
            resample_displacement: 0.5,
            pdr_floor_dbm: curve.floor_dbm,
            pdr_ceiling_dbm: curve.ceiling_dbm,
            obstacles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacSection {
    pub slot_duration: f64,
    pub hopping_sequence: Vec<u8>,
    pub channel_offset: u64,
    pub join_timeout: Asn,
    /// Unjoined agents listen on a random channel each slot.
    pub join_scan: bool,
}

impl Default for MacSection {
    fn default() -> Self {
        Self {
            slot_duration: DEFAULT_SLOT_DURATION,
            hopping_sequence: (0..16).collect(),
            channel_offset: 0,
            join_timeout: DEFAULT_JOIN_TIMEOUT,
            join_scan: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKey,
    pub potential: PotentialKey,
    pub r_collision: f64,
    pub r_flock: f64,
    pub leader_speed: f64,
    /// Line spawns run along +x from the leader, so the default heads away from them.
    pub leader_direction: [f64; 2],
    /// Defaults to `max(1, n_agents / 10)`.
    pub leader_weight: Option<f64>,
    pub alignment: AlignmentKey,
    pub gain: f64,
    pub stop_epsilon: f64,
    /// Belief entries older than this many slotframes are dropped.
    pub stale_timeout: u64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let formation = FormationParams::default();
        Self {
            kind: ControllerKey::LeaderFollower,
            potential: PotentialKey::SingularityFree,
            r_collision: 0.8,
            r_flock: 10.0,
            leader_speed: 1.0,
            leader_direction: [-1.0, 0.0],
            leader_weight: None,
            alignment: AlignmentKey::Implicit,
            gain: formation.gain,
            stop_epsilon: formation.stop_epsilon,
            stale_timeout: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// Speed (m/s) below which an agent counts as stopped.
    pub speed_epsilon: f64,
    pub hold_steps: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            speed_epsilon: 1e-3,
            hold_steps: 5,
        }
    }
}

/// The configuration file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub mode: Mode,
    pub control_timing: TimingKey,
    pub control_every_k: u64,
    /// Seconds between control updates in propagation-only mode.
    pub control_period: f64,
    pub horizon: u64,
    pub trials: usize,
    pub master_seed: u64,
    pub output_dir: String,
    pub trace_deliveries: bool,
    pub world: WorldSection,
    pub link_model: LinkSection,
    pub mac: MacSection,
    pub controller: ControllerSection,
    pub metrics: MetricsSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            mode: Mode::FullNetwork,
            control_timing: TimingKey::PerSlotframe,
            control_every_k: 1,
            control_period: 0.1,
            horizon: 6000,
            trials: 10,
            master_seed: 0,
            output_dir: "output".into(),
            trace_deliveries: true,
            world: WorldSection::default(),
            link_model: LinkSection::default(),
            mac: MacSection::default(),
            controller: ControllerSection::default(),
            metrics: MetricsSection::default(),
        }
    }
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub link_model: LinkModel,
    pub slotframe: Slotframe,
    pub join_timeout: Asn,
    pub join_scan: bool,
    pub controller: Controller,
    pub stale_timeout: u64,
    pub mode: Mode,
    pub control_timing: ControlTiming,
    pub control_period: f64,
    pub horizon: u64,
    pub trials: usize,
    pub master_seed: u64,
    pub output_dir: String,
    pub trace_deliveries: bool,
    pub speed_epsilon: f64,
    pub hold_steps: usize,
    /// The document this was resolved from.
    pub source: ConfigFile,
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string().trim().to_string())
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(parse_err)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Set the key at dotted `path` from its textual form. Numbers, booleans
    /// and arrays are read as TOML literals; anything else is a string.
    pub fn set(&mut self, path: &str, raw: &str) -> Result<()> {
        let mut doc = toml::Value::try_from(&*self).map_err(parse_err)?;
        let value = parse_literal(raw);
        let mut parts = path.split('.').peekable();
        let mut node = &mut doc;
        while let Some(part) = parts.next() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Parse(format!("unknown key `{path}`")))?;
            if parts.peek().is_none() {
                table.insert(part.to_string(), value);
                break;
            }
            node = table
                .get_mut(part)
                .ok_or_else(|| Error::Parse(format!("unknown key `{path}`")))?;
        }
        *self = doc
            .try_into()
            .map_err(|e| Error::Parse(format!("key `{path}`: {}", e.to_string().trim())))?;
        Ok(())
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let w = &self.world;
        let n = w.n_agents;
        let dt = w.dt.unwrap_or(match self.mode {
            Mode::FullNetwork => self.mac.slot_duration,
            Mode::PropagationOnly => self.control_period,
        });
        let spawn = match w.spawn {
            SpawnKey::Line => Spawn::Line { spacing: w.spacing },
            SpawnKey::Disk => Spawn::Disk { density: w.density },
        };
        let world = WorldConfig {
            n_agents: n,
            v_max: w.v_max,
            dt,
            spawn,
            rng_seed: self.master_seed,
        };
        world.validate()?;

        let l = &self.link_model;
        let variant = match l.variant {
            VariantKey::FullConnectivity => LinkVariant::FullConnectivity,
            VariantKey::LineOfSight => LinkVariant::LineOfSight {
                obstacles: l
                    .obstacles
                    .iter()
                    .map(|s| Segment::new(Vec2::new(s[0], s[1]), Vec2::new(s[2], s[3])))
                    .collect(),
            },
            VariantKey::UnitDisk => LinkVariant::UnitDisk { radius: l.radius },
            VariantKey::ProbabilisticDisk => LinkVariant::ProbabilisticDisk,
            VariantKey::ExperimentalRandomness => LinkVariant::ExperimentalRandomness,
        };
        let link_model = LinkModel {
            variant,
            tx_power_dbm: l.tx_power,
            frequency_hz: l.frequency,
            random_loss_max_db: l.random_loss_max,
            resample_displacement: l.resample_displacement,
            curve: PdrCurve {
                floor_dbm: l.pdr_floor_dbm,
                ceiling_dbm: l.pdr_ceiling_dbm,
            },
        };
        link_model.validate()?;

        let slotframe = Slotframe {
            length: n,
            slot_duration: self.mac.slot_duration,
            hopping_sequence: self.mac.hopping_sequence.clone(),
            channel_offset: self.mac.channel_offset,
        };
        slotframe.validate()?;

        let c = &self.controller;
        let controller = match c.kind {
            ControllerKey::LeaderFollower | ControllerKey::Emergent => {
                let direction = Vec2::from(c.leader_direction).normalized().ok_or_else(|| {
                    ConfigError::new("controller.leader_direction must be non-zero")
                })?;
                Controller::Flock(FlockParams {
                    r_collision: c.r_collision,
                    r_flock: c.r_flock,
                    leader_speed: c.leader_speed,
                    leader_direction: direction,
                    leader_weight: c
                        .leader_weight
                        .unwrap_or_else(|| FlockParams::default_leader_weight(n)),
                    variant: if c.kind == ControllerKey::Emergent {
                        FlockVariant::Emergent
                    } else {
                        FlockVariant::LeaderFollower
                    },
                    potential: match c.potential {
                        PotentialKey::SingularityFree => PotentialKind::SingularityFree,
                        PotentialKey::Original => PotentialKind::Original,
                    },
                    alignment: match c.alignment {
                        AlignmentKey::Implicit => Alignment::Implicit,
                        AlignmentKey::Explicit => Alignment::Explicit,
                    },
                })
            }
            ControllerKey::Formation => Controller::Formation(FormationParams {
                gain: c.gain,
                stop_epsilon: c.stop_epsilon,
            }),
        };
        controller.validate()?;

        let control_timing = match self.control_timing {
            TimingKey::PerPacket => ControlTiming::PerPacket,
            TimingKey::PerSlotframe => ControlTiming::PerSlotframe,
            TimingKey::EveryKSlots => {
                if self.control_every_k < 1 {
                    return Err(ConfigError::new("control_every_k must be at least 1"));
                }
                ControlTiming::EveryKSlots(self.control_every_k)
            }
        };
        if !(self.control_period > 0.0) {
            return Err(ConfigError::new(format!(
                "control_period ({}) must be positive",
                self.control_period
            )));
        }
        if self.horizon < 1 {
            return Err(ConfigError::new("horizon must be at least 1"));
        }
        if self.trials < 1 {
            return Err(ConfigError::new("trials must be at least 1"));
        }
        if !(self.metrics.speed_epsilon > 0.0) {
            return Err(ConfigError::new("metrics.speed_epsilon must be positive"));
        }

        Ok(ExperimentConfig {
            world,
            link_model,
            slotframe,
            join_timeout: self.mac.join_timeout,
            join_scan: self.mac.join_scan,
            controller,
            stale_timeout: c.stale_timeout,
            mode: self.mode,
            control_timing,
            control_period: self.control_period,
            horizon: self.horizon,
            trials: self.trials,
            master_seed: self.master_seed,
            output_dir: self.output_dir.clone(),
            trace_deliveries: self.trace_deliveries,
            speed_epsilon: self.metrics.speed_epsilon,
            hold_steps: self.metrics.hold_steps,
            source: self.clone(),
        })
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(ConfigFile::from_toml_str(text)?.resolve()?)
    }

    /// Non-fatal concerns about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.mode == Mode::FullNetwork && self.world.n_agents > FULL_NETWORK_AGENT_WARNING {
            w.push(format!(
                "full_network mode with {} agents: round-robin network formation rarely completes above {} agents",
                self.world.n_agents, FULL_NETWORK_AGENT_WARNING
            ));
        }
        w
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
