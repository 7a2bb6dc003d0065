//! Planar radar odometry on oriented surface points.

mod imu;
mod odometry;
mod osp;
mod register;

pub use imu::{integrate_imu_yaw, MAX_IMU_GAP};
pub use osp::{compute_osp, compute_osp_with_ratio, OrientedSurfacePoint, MIN_EIGEN_RATIO};
pub use register::{
    huber, register, register_multistart, Keyframe, KeyframeBuffer, LineMatch, LineProblem, MatchWeighting, RegisterParams, Registration, YawPrior,
};
pub use odometry::{FrameReport, OdometryParams, RadarOdometry};
