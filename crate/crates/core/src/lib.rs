// Validation writes `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Semantic radar toolkit: turns labeled LiDAR clouds into polar supervision
//! rasters, masks radar returns by class, runs planar radar odometry and
//! localizes against building footprints.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the double-precision instantiation used by the CLI.

pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod odom;
pub mod osmloc;
pub mod pipeline;
pub mod preprocess;
pub mod project;
pub mod radarproc;
pub mod refine;
pub mod scalar;
pub mod se2;
pub mod synthworld;
pub mod types;

pub use error::{Error, Result};
pub use scalar::Real;
pub use se2::Pose2;
pub use types::{ClassRaster, GridSpec, LabeledCloud, Mask, Point3, PolarScan, SemanticClass, Trajectory};

/// Double-precision pose.
pub type Pose = Pose2<f64>;
pub type Scan = PolarScan<f64>;
pub type Raster = ClassRaster<f64>;
pub type Cloud = LabeledCloud<f64>;
pub type Traj = Trajectory<f64>;
pub type Grid = GridSpec<f64>;
pub type Odometry = odom::RadarOdometry<f64>;
pub type OdomParams = odom::OdometryParams<f64>;
pub type Map = osmloc::MapIndex<f64>;
