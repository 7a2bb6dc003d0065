use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::ImuSample;
use crate::odom::imu::integrate_imu_yaw;
use crate::odom::osp::{compute_osp_with_ratio, MIN_EIGEN_RATIO};
use crate::odom::register::{register, register_multistart, Keyframe, KeyframeBuffer, RegisterParams, YawPrior};
use crate::radarproc::{apply_semantic_mask, k_strongest, MaskMode};
use crate::scalar::{normalize_angle, Real};
use crate::se2::Pose2;
use crate::types::{ClassRaster, PolarScan, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct OdometryParams<T> {
    pub k: usize,
    pub min_power: T,
    pub mode: MaskMode,
    pub dilation: usize,
    pub cell_size: T,
    pub min_cell_points: usize,
    /// Cells whose covariance eigenvalue ratio falls below this are dropped.
    pub min_eigen_ratio: T,
    pub keyframes: usize,
    pub keyframe_distance: T,
    /// Radians.
    pub keyframe_angle: T,
    /// Weight of the quadratic heading penalty toward the gyro estimate,
    /// applied only when gyro samples are supplied; 0 uses the gyro for the
    /// initial guess alone. Compare with the registration Hessian, about
    /// matches * range^2; the synthetic experiments use 1e5.
    pub imu_prior_weight: T,
    /// A registration ending farther than this from the constant-velocity
    /// prediction counts as diverged (meters; radians for the angle).
    pub max_prediction_offset: T,
    pub max_prediction_turn: T,
    /// Half-width of the translation grid searched when no trusted velocity
    /// exists (first motion, after a fallback). Grid step is the match gate;
    /// 0 disables the search.
    pub search_radius: T,
    pub register: RegisterParams<T>,
}

impl<T: Real> Default for OdometryParams<T> {
    fn default() -> Self {
        Self {
            k: 12,
            min_power: T::zero(),
            mode: MaskMode::NoneRemoved,
            dilation: 1,
            cell_size: T::lit(3.0),
            min_cell_points: 4,
            min_eigen_ratio: T::lit(MIN_EIGEN_RATIO),
            keyframes: 10,
            keyframe_distance: T::lit(1.5),
            keyframe_angle: T::lit(5f64.to_radians()),
            imu_prior_weight: T::zero(),
            max_prediction_offset: T::lit(1.0),
            max_prediction_turn: T::lit(15f64.to_radians()),
            search_radius: T::lit(4.0),
            register: RegisterParams::default(),
        }
    }
}

impl<T: Real> OdometryParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.keyframes == 0 || self.min_cell_points == 0 {
            return Err(Error::Invalid("k, keyframes and min_cell_points must be at least 1".into()));
        }
        if !(self.cell_size > T::zero()) || self.keyframe_distance < T::zero() || self.keyframe_angle < T::zero() {
            return Err(Error::Invalid("odometry gates must be non-negative and cell size positive".into()));
        }
        if !(self.max_prediction_offset > T::zero() && self.max_prediction_turn > T::zero()) {
            return Err(Error::Invalid("prediction gates must be positive".into()));
        }
        if !(self.search_radius >= T::zero()) {
            return Err(Error::Invalid("search radius must be >= 0".into()));
        }
        if !(self.imu_prior_weight >= T::zero()) {
            return Err(Error::Invalid("imu prior weight must be >= 0".into()));
        }
        self.register.validate()
    }
}

/// Per-frame diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub timestamp_s: f64,
    pub points: usize,
    pub features: usize,
    pub matches: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Registration failed and the prediction was used instead.
    pub fallback: bool,
    pub keyframe: bool,
    pub imu_used: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imu_error: Option<String>,
    pub residual_m: f64,
}

/// The prediction first, then a grid of translated and rotated copies in
/// the prediction's own frame.
fn search_guesses<T: Real>(prediction: Pose2<T>, radius: T, step: T, turn: T) -> Vec<Pose2<T>> {
    let mut out = vec![prediction];
    let n = (radius / step).floor().to_i64().unwrap_or(0);
    let turns = if turn > T::zero() { 2 } else { 0 };
    for k in -turns..=turns {
        for i in -n..=n {
            for j in -n..=n {
                if i == 0 && j == 0 && k == 0 {
                    continue;
                }
                let off = Pose2::new(
                    step * T::lit(i as f64),
                    step * T::lit(j as f64),
                    turn * T::lit(k as f64 / 2.0),
                );
                out.push(prediction.compose(&off));
            }
        }
    }
    out
}

/// Odometry state for one sequence, fed frames in time order.
#[derive(Debug, Clone)]
pub struct RadarOdometry<T> {
    params: OdometryParams<T>,
    buffer: KeyframeBuffer<T>,
    trajectory: Trajectory<T>,
    /// Motion between the last two frames and its duration.
    velocity: Option<(Pose2<T>, f64)>,
    /// Consecutive frames that ended on the prediction.
    fallbacks: usize,
    reports: Vec<FrameReport>,
}

impl<T: Real> RadarOdometry<T> {
    pub fn new(params: OdometryParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            buffer: KeyframeBuffer::new(params.keyframes)?,
            params,
            trajectory: Trajectory::new(),
            velocity: None,
            fallbacks: 0,
            reports: Vec::new(),
        })
    }

    pub fn params(&self) -> &OdometryParams<T> {
        &self.params
    }

    pub fn trajectory(&self) -> &Trajectory<T> {
        &self.trajectory
    }

    pub fn reports(&self) -> &[FrameReport] {
        &self.reports
    }

    pub fn keyframes(&self) -> &KeyframeBuffer<T> {
        &self.buffer
    }

    pub fn into_parts(self) -> (Trajectory<T>, Vec<FrameReport>) {
        (self.trajectory, self.reports)
    }

    /// Processes one scan and returns the new absolute pose.
    pub fn step(&mut self, scan: &PolarScan<T>, raster: Option<&ClassRaster<T>>, imu: Option<&[ImuSample]>) -> Result<Pose2<T>> {
        let p = &self.params;
        let mut points = k_strongest(scan, p.k, p.min_power)?;
        if let Some(r) = raster {
            points = apply_semantic_mask(&points, r, p.mode, p.dilation)?;
        }
        let features = compute_osp_with_ratio(&points.xy(), p.cell_size, p.min_cell_points, p.min_eigen_ratio)?;
        let t = scan.timestamp;
        let mut report = FrameReport {
            timestamp_s: t,
            points: points.len(),
            features: features.len(),
            matches: 0,
            iterations: 0,
            converged: false,
            fallback: false,
            keyframe: false,
            imu_used: false,
            imu_error: None,
            residual_m: 0.0,
        };

        let Some((t_prev, prev)) = self.trajectory.last() else {
            self.trajectory.push(t, Pose2::identity())?;
            self.buffer.push(Keyframe {
                pose: Pose2::identity(),
                features,
            });
            report.keyframe = true;
            self.reports.push(report);
            return Ok(Pose2::identity());
        };
        let dt = t - t_prev;
        if !(dt > 0.0) {
            return Err(Error::contract(format!("scan at {t} is not after the previous frame at {t_prev}")));
        }

        let mut delta = match self.velocity {
            Some((v, vdt)) => {
                let s = T::lit(dt / vdt);
                Pose2::new(v.x * s, v.y * s, v.theta * s)
            }
            None => Pose2::identity(),
        };
        let mut prior = None;
        if let Some(samples) = imu {
            match integrate_imu_yaw(samples, t_prev, t) {
                Ok(yaw) => {
                    delta.theta = T::lit(yaw);
                    report.imu_used = true;
                    if p.imu_prior_weight > T::zero() {
                        prior = Some(YawPrior {
                            theta: normalize_angle(prev.theta + T::lit(yaw)),
                            weight: p.imu_prior_weight,
                        });
                    }
                }
                Err(e) => report.imu_error = Some(e.to_string()),
            }
        }
        let prediction = prev.compose(&delta);

        let pose = if features.is_empty() {
            report.fallback = true;
            prediction
        } else {
            let reg = if self.velocity.is_none() || self.fallbacks > 0 {
                let turn = if report.imu_used { T::zero() } else { p.max_prediction_turn };
                let guesses = search_guesses(prediction, p.search_radius, p.register.match_gate, turn);
                register_multistart(&features, &self.buffer, &guesses, &p.register, prior)?
            } else {
                register(&features, &self.buffer, prediction, &p.register, prior)?
            };
            report.matches = reg.matches;
            report.iterations = reg.iterations;
            report.converged = reg.converged;
            report.residual_m = reg.residual.as_f64();
            let finite = reg.pose.x.is_finite() && reg.pose.y.is_finite() && reg.pose.theta.is_finite();
            // the gate widens after each fallback so a stale velocity
            // cannot lock the estimate onto the prediction forever
            let off = prediction.between(&reg.pose);
            let widen = T::from_count(self.fallbacks + 1);
            let strayed = self.velocity.is_some()
                && (off.translation_norm() > p.max_prediction_offset * widen
                    || off.theta.abs() > p.max_prediction_turn * widen);
            if reg.diverged || !finite || strayed {
                report.fallback = true;
                prediction
            } else {
                reg.pose
            }
        };

        let kf = self.buffer.latest().expect("buffer seeded on first frame").pose;
        let rel = kf.between(&pose);
        if rel.translation_norm() > p.keyframe_distance || rel.theta.abs() > p.keyframe_angle {
            self.buffer.push(Keyframe { pose, features });
            report.keyframe = true;
        }
        // velocity only from two consecutive registered frames; a pose
        // recovered after a fallback also absorbs the prediction's error
        if report.fallback {
            self.fallbacks += 1;
        } else {
            if self.fallbacks == 0 {
                self.velocity = Some((prev.between(&pose), dt));
            }
            self.fallbacks = 0;
        }
        self.trajectory.push(t, pose)?;
        self.reports.push(report);
        Ok(pose)
    }
}
