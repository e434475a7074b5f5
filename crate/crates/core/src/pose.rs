//! Planar rigid-body poses.

use std::f64::consts::{PI, TAU};

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

/// Wraps an angle into `(-π, π]`.
///
/// Rejects non-finite input.
pub fn normalize_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("non-finite angle {theta}")));
    }
    Ok(wrap(theta))
}

/// Infallible wrap used on hot paths where the input is known finite.
#[inline]
pub(crate) fn wrap(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut a = theta.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// A pose in the plane: position in meters, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    /// Builds a pose, wrapping the heading.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: wrap(theta),
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Pose2::new(v[0], v[1], v[2])
    }

    /// `self ⊕ other`: applies `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Pose of `other` expressed in the frame of `self`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Free-function form of [`Pose2::compose`].
pub fn compose(a: &Pose2, b: &Pose2) -> Pose2 {
    a.compose(b)
}

/// Free-function form of [`Pose2::inverse`].
pub fn inverse(a: &Pose2) -> Pose2 {
    a.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: &Pose2, b: &Pose2, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol
            && (a.y - b.y).abs() <= tol
            && wrap(a.theta - b.theta).abs() <= tol
    }

    #[test]
    fn compose_examples() {
        let p = Pose2::new(1.5, -2.0, 0.3);
        assert_eq!(compose(&Pose2::IDENTITY, &p), p);
        assert_eq!(
            compose(&Pose2::new(1.0, 0.0, 0.0), &Pose2::new(1.0, 0.0, 0.0)),
            Pose2::new(2.0, 0.0, 0.0)
        );
        let r = compose(&Pose2::new(0.0, 0.0, FRAC_PI_2), &Pose2::new(1.0, 0.0, 0.0));
        assert!(close(&r, &Pose2::new(0.0, 1.0, FRAC_PI_2), 1e-15));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse(&Pose2::IDENTITY), Pose2::IDENTITY);
        let r = inverse(&Pose2::new(3.0, 0.0, 0.0));
        assert_eq!((r.x, r.y, r.theta), (-3.0, 0.0, 0.0));
        let r = inverse(&Pose2::new(0.0, 0.0, FRAC_PI_2));
        assert!(close(&r, &Pose2::new(0.0, 0.0, -FRAC_PI_2), 1e-15));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_angle(0.0).unwrap(), 0.0);
        assert!((normalize_angle(3.0 * PI).unwrap() - PI).abs() < 1e-12);
        assert_eq!(normalize_angle(-PI).unwrap(), PI);
        assert_eq!(normalize_angle(PI).unwrap(), PI);
        assert!(normalize_angle(f64::NAN).is_err());
        assert!(normalize_angle(f64::INFINITY).is_err());
    }

    fn pose() -> impl Strategy<Value = Pose2> {
        (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn normalize_in_range_and_idempotent(t in -1e4..1e4f64) {
            let a = normalize_angle(t).unwrap();
            prop_assert!(a > -PI && a <= PI);
            prop_assert_eq!(normalize_angle(a).unwrap(), a);
            let k = ((t - a) / TAU).round();
            prop_assert!((t - a - k * TAU).abs() < 1e-9);
        }

        #[test]
        fn compose_with_inverse_is_identity(a in pose()) {
            prop_assert!(close(&a.compose(&a.inverse()), &Pose2::IDENTITY, 1e-12));
        }

        #[test]
        fn compose_is_associative(a in pose(), b in pose(), c in pose()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!(close(&l, &r, 1e-9));
        }

        #[test]
        fn inverse_round_trip(a in pose(), b in pose()) {
            let r = a.inverse().compose(&a.compose(&b));
            prop_assert!(close(&r, &b, 1e-9));
        }
    }
}
