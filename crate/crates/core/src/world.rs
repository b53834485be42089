//! Agent physical state, spawning and velocity-controlled point-mass integration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::vec2::Vec2;

/// Agent id of the flock leader.
pub const LEADER_ID: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Leader,
    Follower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    pub role: Role,
}

impl AgentState {
    pub fn at_rest(id: usize, position: Vec2) -> Self {
        let role = if id == LEADER_ID {
            Role::Leader
        } else {
            Role::Follower
        };
        Self {
            id,
            position,
            velocity: Vec2::ZERO,
            role,
        }
    }

    pub fn is_leader(&self) -> bool {
        self.role == Role::Leader
    }
}

/// Initial placement of the agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spawn {
    /// Agents on the x axis, `spacing` meters apart, leader at the origin.
    Line { spacing: f64 },
    /// Uniform sampling inside a disk sized for the requested density (agents/m²).
    Disk { density: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub n_agents: usize,
    pub v_max: f64,
    pub dt: f64,
    pub spawn: Spawn,
    pub rng_seed: u64,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_agents < 1 {
            return Err(ConfigError::new("world.n_agents must be at least 1"));
        }
        if !(self.dt > 0.0) {
            return Err(ConfigError::new(format!(
                "world.dt ({}) must be positive",
                self.dt
            )));
        }
        if !(self.v_max > 0.0) {
            return Err(ConfigError::new(format!(
                "world.v_max ({}) must be positive",
                self.v_max
            )));
        }
        match self.spawn {
            Spawn::Line { spacing } if !(spacing > 0.0) => Err(ConfigError::new(format!(
                "world.spacing ({spacing}) must be positive"
            ))),
            Spawn::Disk { density } if !(density > 0.0) => Err(ConfigError::new(format!(
                "world.density ({density}) must be positive"
            ))),
            _ => Ok(()),
        }
    }

    pub fn spawn_agents<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<Vec<AgentState>, ConfigError> {
        match self.spawn {
            Spawn::Line { spacing } => spawn_line(self.n_agents, spacing),
            Spawn::Disk { density } => spawn_disk(self.n_agents, density, rng),
        }
    }
}

/// Agent `i` at `(i * spacing, 0)`, all at rest. Agent 0 leads.
pub fn spawn_line(n: usize, spacing: f64) -> Result<Vec<AgentState>, ConfigError> {
    if n < 1 {
        return Err(ConfigError::new("spawn_line needs at least one agent"));
    }
    if !(spacing > 0.0) {
        return Err(ConfigError::new(format!(
            "spawn_line spacing ({spacing}) must be positive"
        )));
    }
    Ok((0..n)
        .map(|i| AgentState::at_rest(i, Vec2::new(i as f64 * spacing, 0.0)))
        .collect())
}

/// Radius of the origin-centered disk holding `n` agents at `density` agents/m².
pub fn disk_radius(n: usize, density: f64) -> f64 {
    (n as f64 / (std::f64::consts::PI * density)).sqrt()
}

/// `n` agents sampled uniformly (by area) in the disk of [`disk_radius`].
pub fn spawn_disk<R: Rng + ?Sized>(
    n: usize,
    density: f64,
    rng: &mut R,
) -> Result<Vec<AgentState>, ConfigError> {
    if n < 1 {
        return Err(ConfigError::new("spawn_disk needs at least one agent"));
    }
    if !(density > 0.0) {
        return Err(ConfigError::new(format!(
            "spawn_disk density ({density}) must be positive"
        )));
    }
    let radius = disk_radius(n, density);
    Ok((0..n)
        .map(|i| {
            let r = radius * rng.gen::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.gen::<f64>();
            // Guard the boundary against rounding in sin/cos.
            let p = Vec2::new(r * theta.cos(), r * theta.sin()).clamp_norm(radius);
            AgentState::at_rest(i, p)
        })
        .collect())
}

/// Apply velocity commands: each velocity becomes its command rescaled to at
/// most `v_max`, then positions advance by `velocity * dt`.
///
/// Panics if `controls` and `agents` differ in length.
pub fn integrate_step(agents: &mut [AgentState], controls: &[Vec2], dt: f64, v_max: f64) {
    assert_eq!(
        agents.len(),
        controls.len(),
        "one control command per agent is required"
    );
    for (agent, &u) in agents.iter_mut().zip(controls) {
        agent.velocity = u.clamp_norm(v_max);
        agent.position += agent.velocity * dt;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn line_layout() {
        let agents = spawn_line(3, 2.0).unwrap();
        let pos: Vec<_> = agents
            .iter()
            .map(|a| (a.position.x, a.position.y))
            .collect();
        assert_eq!(pos, vec![(0.0, 0.0), (2.0, 0.0), (4.0, 0.0)]);
        assert!(agents[0].is_leader());
        assert!(agents[1..].iter().all(|a| a.role == Role::Follower));
        assert!(agents.iter().all(|a| a.velocity == Vec2::ZERO));

        let single = spawn_line(1, 2.0).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].position, Vec2::ZERO);

        let five = spawn_line(5, 2.0).unwrap();
        let max = five
            .iter()
            .flat_map(|a| five.iter().map(move |b| a.position.distance(b.position)))
            .fold(0.0, f64::max);
        assert_eq!(max, 8.0);
    }

    #[test]
    fn invalid_spawn_rejected() {
        assert!(spawn_line(0, 2.0).is_err());
        assert!(spawn_line(3, 0.0).is_err());
        assert!(spawn_line(3, -1.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(spawn_disk(0, 5.0, &mut rng).is_err());
        assert!(spawn_disk(3, 0.0, &mut rng).is_err());
    }

    #[test]
    fn disk_radius_matches_density() {
        // pi r^2 density = n
        assert!((disk_radius(5, 5.0) - 0.5641895835477563).abs() < 1e-12);
        assert!((disk_radius(157, 5.0) - 3.1614).abs() < 1e-3);
    }

    #[test]
    fn disk_spawn_is_reproducible_and_bounded() {
        let a = spawn_disk(157, 5.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = spawn_disk(157, 5.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let r = disk_radius(157, 5.0);
        assert!(a.iter().all(|s| s.position.norm() <= r));
        let ids: Vec<_> = a.iter().map(|s| s.id).collect();
        assert_eq!(ids, (0..157).collect::<Vec<_>>());
    }

    #[test]
    fn integrate_examples() {
        let mut agents = vec![AgentState::at_rest(0, Vec2::ZERO)];
        integrate_step(&mut agents, &[Vec2::new(60.0, 0.0)], 0.1, 30.0);
        assert_eq!(agents[0].velocity, Vec2::new(30.0, 0.0));
        assert!((agents[0].position.x - 3.0).abs() < 1e-12);

        let mut agents = vec![AgentState::at_rest(0, Vec2::new(1.0, 2.0))];
        integrate_step(&mut agents, &[Vec2::ZERO], 0.1, 30.0);
        assert_eq!(agents[0].position, Vec2::new(1.0, 2.0));

        let mut agents = vec![AgentState::at_rest(0, Vec2::ZERO)];
        integrate_step(&mut agents, &[Vec2::new(3.0, 4.0)], 1.0, 30.0);
        assert_eq!(agents[0].position, Vec2::new(3.0, 4.0));
    }

    #[test]
    #[should_panic]
    fn integrate_rejects_length_mismatch() {
        let mut agents = spawn_line(2, 1.0).unwrap();
        integrate_step(&mut agents, &[Vec2::ZERO], 0.1, 30.0);
    }

    proptest! {
        #[test]
        fn speed_never_exceeds_limit(
            cmds in prop::collection::vec((-1e4f64..1e4, -1e4f64..1e4), 1..20),
            v_max in 0.1f64..100.0,
            dt in 1e-3f64..1.0,
        ) {
            let mut agents = spawn_line(cmds.len(), 1.0).unwrap();
            let controls: Vec<Vec2> = cmds.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
            let mut twin = agents.clone();
            integrate_step(&mut agents, &controls, dt, v_max);
            integrate_step(&mut twin, &controls, dt, v_max);
            for a in &agents {
                prop_assert!(a.velocity.norm() <= v_max);
            }
            prop_assert_eq!(agents, twin);
        }
    }
}
