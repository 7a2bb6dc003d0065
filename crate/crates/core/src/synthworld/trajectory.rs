use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::ImuSample;
use crate::scalar::Real;
use crate::se2::Pose2;
use crate::types::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    Straight,
    SquareLoop,
    SCurve,
}

impl FromStr for TrajectoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(Self::Straight),
            "square-loop" | "loop" => Ok(Self::SquareLoop),
            "s-curve" => Ok(Self::SCurve),
            other => Err(Error::Invalid(format!("unknown trajectory kind {other:?}"))),
        }
    }
}

/// Poses sampled every `dt` and a gyro stream at a finer step that divides
/// `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTrajectory<T> {
    pub trajectory: Trajectory<T>,
    pub imu: Vec<ImuSample>,
}

/// Gyro samples per pose step are chosen so the sample spacing is at most this.
pub const IMU_MAX_STEP: f64 = 0.01;

/// Corner turn radius for the loop and curve profiles, meters.
pub const TURN_RADIUS: f64 = 10.0;

/// Segment of a piecewise-linear yaw-rate profile.
#[derive(Debug, Clone, Copy)]
struct Segment {
    steps: usize,
    w0: f64,
    w1: f64,
}

struct Profile {
    dt: f64,
    segments: Vec<Segment>,
}

impl Profile {
    fn steps(&self, seconds: f64) -> usize {
        (seconds / self.dt).round().max(0.0) as usize
    }

    fn straight(&mut self, seconds: f64) {
        let steps = self.steps(seconds);
        if steps > 0 {
            self.segments.push(Segment { steps, w0: 0.0, w1: 0.0 });
        }
    }

    /// Ramp up, hold and ramp down so the heading changes by exactly `angle`.
    fn turn(&mut self, angle: f64, speed: f64) {
        let nominal = speed / TURN_RADIUS;
        let ramp = self.steps(0.5).max(1);
        let ramp_s = ramp as f64 * self.dt;
        let hold = self.steps(angle.abs() / nominal - ramp_s);
        let peak = angle / ((ramp + hold) as f64 * self.dt);
        self.segments.push(Segment { steps: ramp, w0: 0.0, w1: peak });
        if hold > 0 {
            self.segments.push(Segment { steps: hold, w0: peak, w1: peak });
        }
        self.segments.push(Segment { steps: ramp, w0: peak, w1: 0.0 });
    }

    fn turn_seconds(&self, angle: f64, speed: f64) -> f64 {
        let ramp = self.steps(0.5).max(1);
        let hold = self.steps(angle.abs() / (speed / TURN_RADIUS) - ramp as f64 * self.dt);
        (2 * ramp + hold) as f64 * self.dt
    }
}

// 5-point Gauss-Legendre nodes and weights on [-1, 1]
const GL_X: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

pub fn generate_trajectory<T: Real>(kind: TrajectoryKind, length: f64, speed: f64, dt: f64) -> Result<GeneratedTrajectory<T>> {
    if !(length > 0.0 && speed > 0.0 && dt > 0.0) || !length.is_finite() || !speed.is_finite() {
        return Err(Error::contract("trajectory length, speed and dt must be positive"));
    }
    let mut profile = Profile { dt, segments: Vec::new() };
    let total_s = length / speed;
    match kind {
        TrajectoryKind::Straight => profile.straight(total_s),
        TrajectoryKind::SquareLoop => {
            let quarter = std::f64::consts::FRAC_PI_2;
            let side_s = total_s / 4.0 - profile.turn_seconds(quarter, speed);
            if side_s < dt {
                return Err(Error::Invalid(format!("loop of {length} m is too short for its corners")));
            }
            for _ in 0..4 {
                profile.straight(side_s);
                profile.turn(quarter, speed);
            }
        }
        TrajectoryKind::SCurve => {
            let angle = 60f64.to_radians();
            let turn_s = profile.turn_seconds(angle, speed);
            let leg_s = 4.0 * turn_s;
            let mut used = 0.0;
            let mut sign = 1.0;
            profile.straight(leg_s.min(total_s));
            used += leg_s;
            while used + 2.0 * turn_s + leg_s <= total_s + 1e-9 {
                profile.turn(sign * angle, speed);
                profile.turn(-sign * angle, speed);
                profile.straight(leg_s);
                used += 2.0 * turn_s + leg_s;
                sign = -sign;
            }
            profile.straight(total_s - used);
        }
    }

    let sub = (dt / IMU_MAX_STEP).ceil().max(1.0) as usize;
    let h = dt / sub as f64;
    let mut imu = vec![ImuSample {
        timestamp_s: 0.0,
        yaw_rate_rad_s: 0.0,
    }];
    let mut traj = Trajectory::new();
    traj.push(0.0, Pose2::identity())?;
    let (mut x, mut y, mut theta) = (0.0f64, 0.0f64, 0.0f64);
    let mut j = 0usize;
    let mut k = 0usize;
    for seg in &profile.segments {
        let n = seg.steps * sub;
        for i in 0..n {
            let wa = seg.w0 + (seg.w1 - seg.w0) * i as f64 / n as f64;
            let wb = seg.w0 + (seg.w1 - seg.w0) * (i + 1) as f64 / n as f64;
            // heading is quadratic on the substep
            let heading = |tau: f64| theta + wa * tau + 0.5 * (wb - wa) / h * tau * tau;
            for (gx, gw) in GL_X.iter().zip(GL_W) {
                let tau = 0.5 * h * (gx + 1.0);
                let (s, c) = heading(tau).sin_cos();
                x += 0.5 * h * gw * speed * c;
                y += 0.5 * h * gw * speed * s;
            }
            theta += 0.5 * h * (wa + wb);
            j += 1;
            imu.push(ImuSample {
                timestamp_s: j as f64 * h,
                yaw_rate_rad_s: wb,
            });
            if j.is_multiple_of(sub) {
                k += 1;
                traj.push(k as f64 * dt, Pose2::new(T::lit(x), T::lit(y), T::lit(theta)))?;
            }
        }
    }
    Ok(GeneratedTrajectory { trajectory: traj, imu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odom::integrate_imu_yaw;

    #[test]
    fn straight_example() {
        let g = generate_trajectory::<f64>(TrajectoryKind::Straight, 100.0, 10.0, 0.25).unwrap();
        assert_eq!(g.trajectory.len(), 41);
        assert!(g.trajectory.poses().iter().all(|p| p.theta == 0.0));
        let (t, last) = g.trajectory.last().unwrap();
        assert_eq!(t, 10.0);
        assert!((last.x - 100.0).abs() < 1e-9);
    }

    #[test]
    fn square_loop_turns_full_circle() {
        let g = generate_trajectory::<f64>(TrajectoryKind::SquareLoop, 400.0, 10.0, 0.25).unwrap();
        let (t_end, last) = g.trajectory.last().unwrap();
        let yaw = integrate_imu_yaw(&g.imu, 0.0, t_end).unwrap();
        assert!((yaw - std::f64::consts::TAU).abs() < 1e-9);
        // closes near the start
        assert!(last.translation_norm() < 5.0, "{last:?}");
        let length = *g.trajectory.path_distances().last().unwrap();
        assert!((length - 400.0).abs() < 5.0, "{length}");
    }

    #[test]
    fn s_curve_gyro_matches_heading() {
        let g = generate_trajectory::<f64>(TrajectoryKind::SCurve, 300.0, 8.0, 0.25).unwrap();
        let mut unwrapped = 0.0;
        let poses = g.trajectory.poses();
        for w in poses.windows(2) {
            unwrapped += crate::scalar::normalize_angle(w[1].theta - w[0].theta);
        }
        let (t_end, _) = g.trajectory.last().unwrap();
        let yaw = integrate_imu_yaw(&g.imu, 0.0, t_end).unwrap();
        assert!((yaw - unwrapped).abs() < 1e-6);
        assert!(poses.iter().any(|p| p.theta.abs() > 0.9));
    }

    #[test]
    fn bad_inputs() {
        assert!(generate_trajectory::<f64>(TrajectoryKind::Straight, 0.0, 1.0, 0.1).is_err());
        assert!(generate_trajectory::<f64>(TrajectoryKind::SquareLoop, 20.0, 10.0, 0.25).is_err());
        assert!("zigzag".parse::<TrajectoryKind>().is_err());
    }
}
