//! Per-link RSSI and packet delivery ratio under the supported propagation models.
//!
//! Every model reports a Friis-based RSSI for logging. Only the two RSSI-driven
//! models (probabilistic disk and experimental randomness) derive their PDR
//! from it; the geometric models produce a hard 0/1 PDR.

use rand::Rng;

use crate::error::ConfigError;
use crate::vec2::Vec2;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Distances below this are clamped before evaluating Friis (near field is not modeled).
pub const MIN_DISTANCE: f64 = 0.01;

/// Free-space received power in dBm at `distance` meters.
pub fn friis_rssi(distance: f64, tx_power_dbm: f64, frequency_hz: f64) -> f64 {
    let d = distance.max(MIN_DISTANCE);
    let loss = 20.0 * (4.0 * std::f64::consts::PI * d * frequency_hz / SPEED_OF_LIGHT).log10();
    tx_power_dbm - loss
}

/// Piecewise-linear receiver waterfall mapping RSSI to PDR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdrCurve {
    /// At or below this RSSI nothing gets through.
    pub floor_dbm: f64,
    /// At or above this RSSI every packet gets through.
    pub ceiling_dbm: f64,
}

impl Default for PdrCurve {
    fn default() -> Self {
        Self {
            floor_dbm: -97.0,
            ceiling_dbm: -87.0,
        }
    }
}

impl PdrCurve {
    pub fn pdr(&self, rssi: f64) -> f64 {
        if rssi <= self.floor_dbm {
            0.0
        } else if rssi >= self.ceiling_dbm {
            1.0
        } else {
            (rssi - self.floor_dbm) / (self.ceiling_dbm - self.floor_dbm)
        }
    }
}

/// [`PdrCurve::pdr`] with the default knees (-97 / -87 dBm).
pub fn rssi_to_pdr(rssi: f64) -> f64 {
    PdrCurve::default().pdr(rssi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }
}

/// True iff the open segment `from -> to` touches any obstacle segment.
pub fn los_blocked(from: Vec2, to: Vec2, obstacles: &[Segment]) -> bool {
    obstacles.iter().any(|s| open_segment_hits(from, to, s))
}

fn open_segment_hits(p: Vec2, p2: Vec2, obstacle: &Segment) -> bool {
    const EPS: f64 = 1e-12;
    let r = p2 - p;
    let s = obstacle.b - obstacle.a;
    let qp = obstacle.a - p;
    let denom = r.cross(s);
    let len_sq = r.norm_sq();
    if len_sq == 0.0 {
        return false;
    }
    if denom.abs() <= EPS * len_sq.sqrt() * s.norm().max(1.0) {
        // Parallel: only a collinear overlap inside the open interval blocks.
        if qp.cross(r).abs() > EPS * len_sq.sqrt().max(1.0) {
            return false;
        }
        let t0 = qp.dot(r) / len_sq;
        let t1 = (obstacle.b - p).dot(r) / len_sq;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        return hi > 0.0 && lo < 1.0;
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    t > 0.0 && t < 1.0 && (0.0..=1.0).contains(&u)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkVariant {
    FullConnectivity,
    LineOfSight {
        obstacles: Vec<Segment>,
    },
    UnitDisk {
        radius: f64,
    },
    /// Friis minus the full random-loss margin: the deterministic worst case.
    ProbabilisticDisk,
    /// Friis minus a uniform random loss, redrawn when an endpoint moves.
    ExperimentalRandomness,
}

impl LinkVariant {
    pub fn name(&self) -> &'static str {
        match self {
            LinkVariant::FullConnectivity => "full_connectivity",
            LinkVariant::LineOfSight { .. } => "line_of_sight",
            LinkVariant::UnitDisk { .. } => "unit_disk",
            LinkVariant::ProbabilisticDisk => "probabilistic_disk",
            LinkVariant::ExperimentalRandomness => "experimental_randomness",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    pub variant: LinkVariant,
    pub tx_power_dbm: f64,
    pub frequency_hz: f64,
    pub random_loss_max_db: f64,
    /// Endpoint displacement (m) that triggers a new random-loss draw.
    pub resample_displacement: f64,
    pub curve: PdrCurve,
}

impl LinkModel {
    pub fn new(variant: LinkVariant) -> Self {
        Self {
            variant,
            tx_power_dbm: 0.0,
            frequency_hz: 2.4e9,
            random_loss_max_db: 40.0,
            resample_displacement: 0.5,
            curve: PdrCurve::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let LinkVariant::UnitDisk { radius } = self.variant {
            if !(radius > 0.0) {
                return Err(ConfigError::new(format!(
                    "link_model.radius ({radius}) must be positive for unit_disk"
                )));
            }
        }
        if !(self.random_loss_max_db >= 0.0) {
            return Err(ConfigError::new(format!(
                "link_model.random_loss_max ({}) must be non-negative",
                self.random_loss_max_db
            )));
        }
        if !(self.frequency_hz > 0.0) {
            return Err(ConfigError::new(format!(
                "link_model.frequency ({}) must be positive",
                self.frequency_hz
            )));
        }
        if !(self.resample_displacement >= 0.0) {
            return Err(ConfigError::new(format!(
                "link_model.resample_displacement ({}) must be non-negative",
                self.resample_displacement
            )));
        }
        if !(self.curve.floor_dbm < self.curve.ceiling_dbm) {
            return Err(ConfigError::new(format!(
                "link_model.pdr_floor_dbm ({}) must be below link_model.pdr_ceiling_dbm ({})",
                self.curve.floor_dbm, self.curve.ceiling_dbm
            )));
        }
        Ok(())
    }

    pub fn friis(&self, distance: f64) -> f64 {
        friis_rssi(distance, self.tx_power_dbm, self.frequency_hz)
    }

    /// Whether link state must persist between evaluations.
    pub fn is_stateful(&self) -> bool {
        matches!(self.variant, LinkVariant::ExperimentalRandomness)
    }
}

/// State of one undirected link. `pair.0 < pair.1`, and the sample positions
/// follow the same order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub pair: (u32, u32),
    pub rssi: f64,
    pub pdr: f64,
    /// Random loss (dB) currently applied on top of Friis.
    pub loss_db: f64,
    pub last_sample_position_i: Vec2,
    pub last_sample_position_j: Vec2,
}

/// Evaluate the link between agents `pair` at the given positions.
///
/// Only the experimental-randomness model consumes `rng`, and only when it
/// redraws its loss: when there is no prior, or when either endpoint moved
/// more than `resample_displacement` since the prior draw.
pub fn link_pdr<R: Rng + ?Sized>(
    model: &LinkModel,
    pair: (usize, usize),
    pos_i: Vec2,
    pos_j: Vec2,
    prior: Option<&LinkState>,
    rng: &mut R,
) -> LinkState {
    let (pair, pos_i, pos_j) = if pair.0 <= pair.1 {
        (pair, pos_i, pos_j)
    } else {
        ((pair.1, pair.0), pos_j, pos_i)
    };
    let d = pos_i.distance(pos_j).max(MIN_DISTANCE);
    let friis = model.friis(d);
    let mut state = LinkState {
        pair: (pair.0 as u32, pair.1 as u32),
        rssi: friis,
        pdr: 1.0,
        loss_db: 0.0,
        last_sample_position_i: pos_i,
        last_sample_position_j: pos_j,
    };
    match &model.variant {
        LinkVariant::FullConnectivity => {}
        LinkVariant::LineOfSight { obstacles } => {
            state.pdr = if los_blocked(pos_i, pos_j, obstacles) {
                0.0
            } else {
                1.0
            };
        }
        LinkVariant::UnitDisk { radius } => {
            state.pdr = if d <= *radius { 1.0 } else { 0.0 };
        }
        LinkVariant::ProbabilisticDisk => {
            state.loss_db = model.random_loss_max_db;
            state.rssi = friis - state.loss_db;
            state.pdr = model.curve.pdr(state.rssi);
        }
        LinkVariant::ExperimentalRandomness => {
            let reuse = prior.filter(|p| {
                p.pair == state.pair
                    && p.last_sample_position_i.distance(pos_i) <= model.resample_displacement
                    && p.last_sample_position_j.distance(pos_j) <= model.resample_displacement
            });
            match reuse {
                Some(p) => {
                    state.loss_db = p.loss_db;
                    state.last_sample_position_i = p.last_sample_position_i;
                    state.last_sample_position_j = p.last_sample_position_j;
                }
                None => state.loss_db = rng.gen::<f64>() * model.random_loss_max_db,
            }
            state.rssi = friis - state.loss_db;
            state.pdr = model.curve.pdr(state.rssi);
        }
    }
    state
}

/// Link states for every unordered pair of `n` agents, stored densely.
#[derive(Debug, Clone)]
pub struct LinkCache {
    n: usize,
    states: Vec<Option<LinkState>>,
}

impl LinkCache {
    /// A cache for `n` agents. Storage is only allocated for stateful models.
    pub fn new(n: usize, model: &LinkModel) -> Self {
        let states = if model.is_stateful() {
            vec![None; n * n.saturating_sub(1) / 2]
        } else {
            Vec::new()
        };
        Self { n, states }
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        debug_assert!(hi < self.n && lo != hi);
        hi * (hi - 1) / 2 + lo
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&LinkState> {
        if self.states.is_empty() {
            return None;
        }
        self.states[self.index(i, j)].as_ref()
    }

    /// Re-evaluate link `(i, j)` at the given positions, updating the cache.
    pub fn evaluate<R: Rng + ?Sized>(
        &mut self,
        model: &LinkModel,
        i: usize,
        j: usize,
        pos_i: Vec2,
        pos_j: Vec2,
        rng: &mut R,
    ) -> LinkState {
        if self.states.is_empty() {
            return link_pdr(model, (i, j), pos_i, pos_j, None, rng);
        }
        let idx = self.index(i, j);
        let state = link_pdr(model, (i, j), pos_i, pos_j, self.states[idx].as_ref(), rng);
        self.states[idx] = Some(state);
        state
    }
}
