//! Decentralized line formation by local orthogonal regression.

use crate::vec2::Vec2;
use crate::world::AgentState;

use super::belief::BeliefState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub point: Vec2,
    /// Unit direction.
    pub direction: Vec2,
}

impl Line {
    pub fn project(&self, p: Vec2) -> Vec2 {
        self.point + self.direction * (p - self.point).dot(self.direction)
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        (p - self.point).cross(self.direction).abs()
    }
}

/// Principal-axis line through the centroid of `points`.
///
/// Coincident points (including a single point) yield the horizontal line
/// through them. Panics on an empty slice.
pub fn local_line_fit(points: &[Vec2]) -> Line {
    assert!(!points.is_empty(), "line fit needs at least one point");
    let n = points.len() as f64;
    let centroid = points.iter().copied().sum::<Vec2>() * (1.0 / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = *p - centroid;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    // Leading eigenvector of [[sxx, sxy], [sxy, syy]]; atan2(0, 0) = 0 gives horizontal.
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Line {
        point: centroid,
        direction: Vec2::new(theta.cos(), theta.sin()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormationParams {
    /// Proportional gain toward the local line, 1/s.
    pub gain: f64,
    /// Distance to the local line below which the agent stops, m.
    pub stop_epsilon: f64,
}

impl Default for FormationParams {
    fn default() -> Self {
        Self {
            gain: 1.0,
            stop_epsilon: 0.01,
        }
    }
}

/// Drive toward the projection onto the line fitted through the agent's own
/// position and every believed neighbor position.
pub fn formation_control(belief: &BeliefState, me: &AgentState, params: &FormationParams) -> Vec2 {
    if belief.is_empty() {
        return Vec2::ZERO;
    }
    let mut points = Vec::with_capacity(belief.len() + 1);
    points.push(me.position);
    points.extend(belief.iter().map(|(_, n)| n.position));
    let line = local_line_fit(&points);
    let offset = line.project(me.position) - me.position;
    if offset.norm() < params.stop_epsilon {
        Vec2::ZERO
    } else {
        offset * params.gain
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac::Packet;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Vec2> {
        v.iter().map(|&(x, y)| Vec2::new(x, y)).collect()
    }

    fn same_line(line: &Line, dir: Vec2) -> bool {
        line.direction.cross(dir).abs() < 1e-9
    }

    #[test]
    fn collinear_fits() {
        let diag = local_line_fit(&pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]));
        assert!(same_line(&diag, Vec2::new(1.0, 1.0).normalized().unwrap()));
        assert!(diag.distance(Vec2::ZERO) < 1e-12);

        let vertical = local_line_fit(&pts(&[(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)]));
        assert!(same_line(&vertical, Vec2::new(0.0, 1.0)));
        assert!(vertical.point.x.abs() < 1e-12);
    }

    #[test]
    fn triangle_fit_by_hand() {
        // sxx = 2, syy = 2/3, sxy = 0 around centroid (1, 1/3).
        let line = local_line_fit(&pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]));
        assert!((line.point - Vec2::new(1.0, 1.0 / 3.0)).norm() < 1e-9);
        assert!((line.direction - Vec2::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn degenerate_fits_are_horizontal() {
        let one = local_line_fit(&pts(&[(3.0, -2.0)]));
        assert_eq!(one.point, Vec2::new(3.0, -2.0));
        assert_eq!(one.direction, Vec2::new(1.0, 0.0));
        let same = local_line_fit(&pts(&[(1.0, 1.0), (1.0, 1.0)]));
        assert_eq!(same.direction, Vec2::new(1.0, 0.0));
        let two = local_line_fit(&pts(&[(0.0, 0.0), (3.0, 4.0)]));
        assert!(two.distance(Vec2::new(3.0, 4.0)) < 1e-12);
    }

    fn belief_with(owner: usize, others: &[(usize, f64, f64)]) -> BeliefState {
        let mut b = BeliefState::new(owner, 8);
        for &(src, x, y) in others {
            let p = Packet {
                src,
                position: Vec2::new(x, y),
                velocity: Vec2::ZERO,
                asn: 0,
            };
            b.update(&p, 0).unwrap();
        }
        b
    }

    #[test]
    fn control_examples() {
        let params = FormationParams::default();
        let on_line = AgentState::at_rest(1, Vec2::new(1.0, 1.0));
        let b = belief_with(1, &[(2, 0.0, 0.0), (3, 2.0, 2.0)]);
        assert_eq!(formation_control(&b, &on_line, &params), Vec2::ZERO);

        let alone = AgentState::at_rest(1, Vec2::new(4.0, 4.0));
        assert_eq!(
            formation_control(&BeliefState::new(1, 8), &alone, &params),
            Vec2::ZERO
        );

        let me = AgentState::at_rest(1, Vec2::new(0.0, 1.0));
        let b = belief_with(1, &[(2, -1.0, 0.0), (3, 1.0, 0.0)]);
        let u = formation_control(&b, &me, &params);
        assert!((u - Vec2::new(0.0, 1.0 / 3.0 - 1.0)).norm() < 1e-9, "{u:?}");
    }

    proptest! {
        #[test]
        fn orthogonal_residual_is_rotation_invariant(
            raw in prop::collection::vec((-5f64..5.0, -5f64..5.0), 3..12),
            angle in 0f64..std::f64::consts::TAU,
        ) {
            let points = pts(&raw);
            let rotated: Vec<Vec2> = points.iter().map(|p| p.rotated(angle)).collect();
            let residual = |ps: &[Vec2]| {
                let l = local_line_fit(ps);
                ps.iter().map(|p| l.distance(*p).powi(2)).sum::<f64>()
            };
            let (a, b) = (residual(&points), residual(&rotated));
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
