//! Seeded synthetic worlds: scenes, sensor simulators and trajectories.

mod layout;
mod scene;
mod sensors;
mod trajectory;

pub use layout::LayoutParams;
pub use scene::{
    boundary_distance, point_in_polygon, polygon_distance, rectangle, segment_distance, signed_area, Building,
    SceneSpec, Surface, Tree, Vehicle,
};
pub use sensors::{
    frame_seed, radar_sequence, simulate_lidar, simulate_radar, CorruptionSpec, LidarFrame, LidarSensor, RadarFrame, RadarSensor,
};
pub use trajectory::{generate_trajectory, GeneratedTrajectory, TrajectoryKind, IMU_MAX_STEP, TURN_RADIUS};
