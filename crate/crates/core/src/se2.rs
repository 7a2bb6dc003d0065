//! Planar rigid transforms.

use serde::{Deserialize, Serialize};

use crate::scalar::{normalize_angle, Real};

/// SE(2) pose: translation in meters, heading in radians within `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Real> Default for Pose2<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose2<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self {
            x: T::zero(),
            y: T::zero(),
            theta: T::zero(),
        }
    }

    pub fn translation(&self) -> [T; 2] {
        [self.x, self.y]
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// `self⁻¹ ∘ other`, the pose of `other` expressed in this frame.
    pub fn between(&self, other: &Self) -> Self {
        self.inverse().compose(other)
    }

    /// Maps a point from this frame into the parent frame: `R(theta)·p + t`.
    pub fn apply(&self, p: [T; 2]) -> [T; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    pub fn rotate(&self, v: [T; 2]) -> [T; 2] {
        let (s, c) = self.theta.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    pub fn translation_norm(&self) -> T {
        self.x.hypot(self.y)
    }

    pub fn cast<U: Real>(&self) -> Pose2<U> {
        Pose2 {
            x: U::lit(self.x.as_f64()),
            y: U::lit(self.y.as_f64()),
            theta: U::lit(self.theta.as_f64()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: Pose2<f64>, b: Pose2<f64>, tol: f64) -> bool {
        (a.x - b.x).abs() < tol
            && (a.y - b.y).abs() < tol
            && normalize_angle(a.theta - b.theta).abs() < tol
    }

    #[test]
    fn compose_examples() {
        let p = Pose2::new(1.5, -2.0, 0.3);
        assert!(close(Pose2::identity().compose(&p), p, 1e-15));
        let t = Pose2::new(1.0, 0.0, 0.0);
        assert!(close(t.compose(&t), Pose2::new(2.0, 0.0, 0.0), 1e-15));
        // R(pi/2) (1,0) = (0,1); headings add
        let r = Pose2::new(0.0, 0.0, FRAC_PI_2);
        assert!(close(r.compose(&t), Pose2::new(0.0, 1.0, FRAC_PI_2), 1e-15));
    }

    #[test]
    fn apply_examples() {
        assert_eq!(Pose2::<f64>::identity().apply([3.0, 4.0]), [3.0, 4.0]);
        let half = Pose2::new(0.0, 0.0, PI).apply([1.0, 0.0]);
        assert!((half[0] + 1.0).abs() < 1e-15 && half[1].abs() < 1e-15);
        // (2,1) + R(pi/2)(1,0) = (2,1) + (0,1)
        let q = Pose2::new(2.0, 1.0, FRAC_PI_2).apply([1.0, 0.0]);
        assert!((q[0] - 2.0).abs() < 1e-15 && (q[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn theta_is_normalized() {
        let p = Pose2::new(0.0, 0.0, 3.0 * PI);
        assert!((p.theta - PI).abs() < 1e-12);
        let q = Pose2::new(0.0, 0.0, -PI);
        assert_eq!(q.theta, PI);
        let r = Pose2::new(0.0, 0.0, 3.0).compose(&Pose2::new(0.0, 0.0, 3.0));
        assert!(r.theta > -PI && r.theta <= PI);
    }

    #[test]
    fn f32_instantiation() {
        let a = Pose2::<f32>::new(1.0, 2.0, 0.5);
        let id = a.compose(&a.inverse());
        assert!(id.x.abs() < 1e-6 && id.y.abs() < 1e-6 && id.theta.abs() < 1e-6);
    }

    fn pose() -> impl Strategy<Value = Pose2<f64>> {
        (-100.0..100.0f64, -100.0..100.0f64, -10.0..10.0f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(p in pose()) {
            prop_assert!(close(p.compose(&p.inverse()), Pose2::identity(), 1e-9));
            prop_assert!(close(p.inverse().compose(&p), Pose2::identity(), 1e-9));
        }

        #[test]
        fn compose_is_associative(a in pose(), b in pose(), c in pose()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(close(left, right, 1e-9));
        }

        #[test]
        fn apply_matches_compose(a in pose(), px in -50.0..50.0f64, py in -50.0..50.0f64) {
            let via_pose = a.compose(&Pose2::new(px, py, 0.0));
            let q = a.apply([px, py]);
            prop_assert!((via_pose.x - q[0]).abs() < 1e-9 && (via_pose.y - q[1]).abs() < 1e-9);
        }
    }
}
