//! Manufactured harmonic solutions u(r, theta) = r^alpha cos(alpha (theta - theta0)).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Harmonic function `u = r^alpha cos(alpha (theta - theta0))` centered at
/// `center`, with the branch cut along `theta = theta0 + pi`.
///
/// For the canonical geometries the singular corner sits at the origin with
/// its interior-angle bisector along +x, so `theta0 = 0` keeps the branch cut
/// in the exterior.
#[derive(Debug, Clone, Copy)]
pub struct SingularSolution {
    pub alpha: f64,
    pub theta0: f64,
    pub center: Point,
}

impl SingularSolution {
    pub fn new(alpha: f64, theta0: f64, center: Point) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "solution exponent alpha must be positive, got {alpha}"
            )));
        }
        Ok(SingularSolution {
            alpha,
            theta0,
            center,
        })
    }

    /// Standard exponent at the origin, branch cut along the negative x-axis.
    pub fn centered(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0, Point::new(0.0, 0.0))
    }

    fn polar(&self, x: Point) -> (f64, f64) {
        let d = x - self.center;
        let r = d.norm();
        let mut theta = d.y.atan2(d.x) - self.theta0;
        if theta > PI {
            theta -= 2.0 * PI;
        } else if theta <= -PI {
            theta += 2.0 * PI;
        }
        (r, theta)
    }

    /// Boundary trace u(x).
    pub fn trace(&self, x: Point) -> f64 {
        let (r, theta) = self.polar(x);
        if r == 0.0 {
            return 0.0; // alpha > 0
        }
        r.powf(self.alpha) * (self.alpha * theta).cos()
    }

    /// Gradient of u in Cartesian components; singular at the center for
    /// alpha < 1.
    pub fn gradient(&self, x: Point) -> Result<Point> {
        let (r, theta) = self.polar(x);
        if r == 0.0 {
            return Err(Error::SingularPoint(
                "gradient of r^alpha solution at its center".into(),
            ));
        }
        // With f(z) = (z e^{-i theta0})^alpha analytic off the cut:
        // f'(z) = alpha r^{alpha-1} e^{i((alpha-1)(theta-theta0') - theta0)},
        // grad u = (Re f', -Im f').
        let mag = self.alpha * r.powf(self.alpha - 1.0);
        let phase = (self.alpha - 1.0) * theta - self.theta0;
        Ok(Point::new(mag * phase.cos(), -mag * phase.sin()))
    }

    /// Normal derivative (flux) at x with unit normal n.
    pub fn flux(&self, x: Point, n: Point) -> Result<f64> {
        Ok(self.gradient(x)?.dot(n))
    }

    /// Tangential (arc-length) derivative at x with unit tangent t.
    pub fn tangential(&self, x: Point, t: Point) -> Result<f64> {
        Ok(self.gradient(x)?.dot(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn trace_reference_values() {
        let s = SingularSolution::centered(1.0).unwrap();
        assert_relative_eq!(s.trace(Point::new(0.3, 0.0)), 0.3, epsilon = 1e-15);

        let s = SingularSolution::centered(0.5).unwrap();
        assert_relative_eq!(
            s.trace(Point::new(0.0, 1.0)),
            (PI / 4.0).cos(),
            epsilon = 1e-15
        );

        let s = SingularSolution::centered(2.0).unwrap();
        // r^2 cos(2 theta) = x^2 - y^2
        assert_relative_eq!(s.trace(Point::new(0.3, 0.2)), 0.05, epsilon = 1e-15);
        assert_relative_eq!(s.trace(Point::new(0.0, 0.0)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn flux_reference_values() {
        let s = SingularSolution::centered(1.0).unwrap();
        let x = Point::new(0.2, 0.4);
        assert_relative_eq!(s.flux(x, Point::new(1.0, 0.0)).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.flux(x, Point::new(0.0, 1.0)).unwrap(), 0.0, epsilon = 1e-14);

        let s = SingularSolution::centered(2.0).unwrap();
        // grad(x^2 - y^2) = (2x, -2y)
        assert_relative_eq!(
            s.flux(Point::new(0.3, 0.2), Point::new(0.0, 1.0)).unwrap(),
            -0.4,
            epsilon = 1e-14
        );
        assert!(s.gradient(Point::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        assert!(SingularSolution::centered(0.0).is_err());
        assert!(SingularSolution::centered(-0.5).is_err());
    }

    #[test]
    fn five_point_laplacian_vanishes() {
        let mut rng = StdRng::seed_from_u64(7);
        for &alpha in &[1.0 / 3.0, 1.0 / 8.0, 2.0 / 3.0, 1.5] {
            let s = SingularSolution::centered(alpha).unwrap();
            for _ in 0..100 {
                // Points away from the cut and the center.
                let r = rng.gen_range(0.2..0.5);
                let th: f64 = rng.gen_range(-2.0..2.0);
                let x = Point::new(r * th.cos(), r * th.sin());
                let delta = 1e-4;
                let lap = (s.trace(Point::new(x.x + delta, x.y))
                    + s.trace(Point::new(x.x - delta, x.y))
                    + s.trace(Point::new(x.x, x.y + delta))
                    + s.trace(Point::new(x.x, x.y - delta))
                    - 4.0 * s.trace(x))
                    / (delta * delta);
                assert!(lap.abs() < 1e-4, "alpha={alpha} x={x}: lap={lap}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(11);
        for &alpha in &[1.0 / 3.0, 1.0 / 8.0, 2.0] {
            let s = SingularSolution::new(alpha, 0.3, Point::new(0.05, -0.02)).unwrap();
            for _ in 0..50 {
                let r = rng.gen_range(0.2..0.5);
                let th: f64 = rng.gen_range(-2.0..2.0);
                let x = s.center + Point::new(r * th.cos(), r * th.sin());
                let delta = 1e-5;
                let gx = (s.trace(Point::new(x.x + delta, x.y))
                    - s.trace(Point::new(x.x - delta, x.y)))
                    / (2.0 * delta);
                let gy = (s.trace(Point::new(x.x, x.y + delta))
                    - s.trace(Point::new(x.x, x.y - delta)))
                    / (2.0 * delta);
                let g = s.gradient(x).unwrap();
                assert!((g.x - gx).abs() < 1e-6 && (g.y - gy).abs() < 1e-6);
            }
        }
    }
}
