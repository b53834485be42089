//! Pairwise flocking potentials and their analytic gradients.

use thiserror::Error;

use crate::vec2::Vec2;

/// Largest exponent fed to `exp` before the attraction term saturates
/// (`exp(700)` is still finite; `exp(710)` is not).
const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("potential is singular at separation {distance} m (flocking radius {r_flock} m)")]
pub struct Singularity {
    pub distance: f64,
    pub r_flock: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialConstants {
    pub k_col: f64,
    pub k_conn: f64,
}

impl PotentialConstants {
    pub fn new(r_collision: f64, r_flock: f64) -> Self {
        Self {
            k_col: r_collision * r_collision + r_flock,
            k_conn: r_flock,
        }
    }
}

/// Exponential collision/connectivity potential with no finite-distance pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularityFree {
    pub r_collision: f64,
    pub r_flock: f64,
    pub constants: PotentialConstants,
}

impl SingularityFree {
    pub fn new(r_collision: f64, r_flock: f64) -> Self {
        Self {
            r_collision,
            r_flock,
            constants: PotentialConstants::new(r_collision, r_flock),
        }
    }

    pub fn value(&self, distance: f64) -> f64 {
        let d2 = distance * distance;
        let rc2 = self.r_collision * self.r_collision;
        let rf2 = self.r_flock * self.r_flock;
        self.constants.k_col * (-d2 / rc2).exp()
            + self.constants.k_conn * (d2 / rf2).min(MAX_EXPONENT).exp()
    }

    /// dV/dx_i = (x_i - x_j) * bracket(d). Negative bracket repels, positive attracts.
    pub fn bracket(&self, distance: f64) -> f64 {
        let d2 = distance * distance;
        let rc2 = self.r_collision * self.r_collision;
        let rf2 = self.r_flock * self.r_flock;
        -(2.0 * self.constants.k_col / rc2) * (-d2 / rc2).exp()
            + (2.0 * self.constants.k_conn / rf2) * (d2 / rf2).min(MAX_EXPONENT).exp()
    }

    /// Gradient of the pair potential with respect to `x_i`; zero when the points coincide.
    pub fn gradient(&self, x_i: Vec2, x_j: Vec2) -> Vec2 {
        let diff = x_i - x_j;
        if diff == Vec2::ZERO {
            return Vec2::ZERO;
        }
        let d = diff.norm();
        let g = diff * self.bracket(d);
        if g.is_finite() {
            g
        } else {
            // Saturated attraction at extreme range: a huge but finite pull along the pair axis.
            diff * (0.5 * f64::MAX / d)
        }
    }
}

/// `1/d² + 1/(r_flock² - d²)`: diverges at contact and at the flocking radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Original {
    pub r_flock: f64,
}

impl Original {
    pub fn value(&self, distance: f64) -> Result<f64, Singularity> {
        self.check(distance)?;
        let d2 = distance * distance;
        Ok(1.0 / d2 + 1.0 / (self.r_flock * self.r_flock - d2))
    }

    pub fn gradient(&self, x_i: Vec2, x_j: Vec2) -> Result<Vec2, Singularity> {
        let diff = x_i - x_j;
        let d2 = diff.norm_sq();
        self.check(d2.sqrt())?;
        let gap = self.r_flock * self.r_flock - d2;
        // dV/d(d²) = -1/d⁴ + 1/(r² - d²)², and d(d²)/dx_i = 2 (x_i - x_j).
        Ok(diff * (2.0 * (-1.0 / (d2 * d2) + 1.0 / (gap * gap))))
    }

    fn check(&self, distance: f64) -> Result<(), Singularity> {
        if distance > 0.0 && distance < self.r_flock {
            Ok(())
        } else {
            Err(Singularity {
                distance,
                r_flock: self.r_flock,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    SingularityFree(SingularityFree),
    Original(Original),
}

impl Potential {
    pub fn gradient(&self, x_i: Vec2, x_j: Vec2) -> Result<Vec2, Singularity> {
        match self {
            Potential::SingularityFree(p) => Ok(p.gradient(x_i, x_j)),
            Potential::Original(p) => p.gradient(x_i, x_j),
        }
    }
}

/// Gradient of the singularity-free pair potential for the given radii.
pub fn potential_gradient(x_i: Vec2, x_j: Vec2, r_collision: f64, r_flock: f64) -> Vec2 {
    SingularityFree::new(r_collision, r_flock).gradient(x_i, x_j)
}

/// Gradient of the original pair potential; errors at or beyond `r_flock`.
pub fn original_potential_gradient(
    x_i: Vec2,
    x_j: Vec2,
    r_flock: f64,
) -> Result<Vec2, Singularity> {
    Original { r_flock }.gradient(x_i, x_j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn constants_for_default_radii() {
        let c = PotentialConstants::new(0.8, 10.0);
        assert!((c.k_col - 10.64).abs() < 1e-12);
        assert_eq!(c.k_conn, 10.0);
    }

    #[test]
    fn coincident_points_give_zero() {
        let p = Vec2::new(1.0, 2.0);
        assert_eq!(potential_gradient(p, p, 0.8, 10.0), Vec2::ZERO);
    }

    #[test]
    fn equilibrium_separates_repulsion_from_attraction() {
        let pot = SingularityFree::new(0.8, 10.0);
        // Independent scalar: -(2 K_col / rc²) e^{-d²/rc²} + (2 K_conn / rf²) e^{d²/rf²}
        let scalar = |d: f64| {
            -(2.0 * 10.64 / 0.64) * (-d * d / 0.64).exp()
                + (2.0 * 10.0 / 100.0) * (d * d / 100.0).exp()
        };
        let d_star = bisect(0.1, 10.0, scalar);
        // Closed form: d*² = ln(A/B) / (1/rc² + 1/rf²) with A = 2 K_col / rc², B = 2 K_conn / rf².
        assert!((d_star - 1.803_281_354_526_818_7).abs() < 1e-9, "{d_star}");
        let xj = Vec2::ZERO;
        let inside = pot.gradient(Vec2::new(d_star - 1e-3, 0.0), xj);
        let outside = pot.gradient(Vec2::new(d_star + 1e-3, 0.0), xj);
        // -gradient is the motion: away from j inside, toward j outside.
        assert!(-inside.x > 0.0);
        assert!(-outside.x < 0.0);
    }

    #[test]
    fn original_diverges_at_flocking_radius() {
        let g = original_potential_gradient(Vec2::new(10.0 - 1e-7, 0.0), Vec2::ZERO, 10.0).unwrap();
        assert!(g.norm() > 1e6);
        assert!(original_potential_gradient(Vec2::new(10.0, 0.0), Vec2::ZERO, 10.0).is_err());
        assert!(original_potential_gradient(Vec2::new(12.0, 0.0), Vec2::ZERO, 10.0).is_err());
        assert!(original_potential_gradient(Vec2::ZERO, Vec2::ZERO, 10.0).is_err());
        // The singularity-free gradient stays finite there.
        assert!(potential_gradient(Vec2::new(10.0, 0.0), Vec2::ZERO, 0.8, 10.0).is_finite());
    }

    #[test]
    fn original_minimum_has_zero_gradient() {
        let r = 10.0;
        let dv = |d: f64| -1.0 / d.powi(4) + 1.0 / (r * r - d * d).powi(2);
        let d_min = bisect(0.5, 9.5, dv);
        let g = original_potential_gradient(Vec2::new(d_min, 0.0), Vec2::ZERO, r).unwrap();
        assert!(g.norm() < 1e-9, "{g:?}");
        // Near contact the 1/d² term dominates: motion (-gradient) points away from j.
        let close = original_potential_gradient(Vec2::new(0.5, 0.0), Vec2::ZERO, r).unwrap();
        assert!(-close.x > 0.0);
    }

    #[test]
    fn saturates_instead_of_overflowing() {
        let g = potential_gradient(Vec2::new(1e4, 0.0), Vec2::ZERO, 0.8, 10.0);
        assert!(g.is_finite());
        assert!(g.x > 0.0);
    }

    proptest! {
        #[test]
        fn antisymmetric(ax in -30f64..30.0, ay in -30f64..30.0, bx in -30f64..30.0, by in -30f64..30.0) {
            let (a, b) = (Vec2::new(ax, ay), Vec2::new(bx, by));
            prop_assert_eq!(potential_gradient(a, b, 0.8, 10.0), -potential_gradient(b, a, 0.8, 10.0));
        }

        #[test]
        fn rotation_equivariant(
            ax in -20f64..20.0, ay in -20f64..20.0,
            bx in -20f64..20.0, by in -20f64..20.0,
            angle in 0f64..std::f64::consts::TAU,
        ) {
            let (a, b) = (Vec2::new(ax, ay), Vec2::new(bx, by));
            let rotated = potential_gradient(a.rotated(angle), b.rotated(angle), 0.8, 10.0);
            let expected = potential_gradient(a, b, 0.8, 10.0).rotated(angle);
            let scale = expected.norm().max(1.0);
            prop_assert!((rotated - expected).norm() <= 1e-9 * scale);
        }

        #[test]
        fn finite_for_positive_separation(d in 1e-9f64..1e6, r_f in 1.0f64..50.0) {
            prop_assert!(potential_gradient(Vec2::new(d, 0.0), Vec2::ZERO, 0.8, r_f).is_finite());
        }
    }
}
