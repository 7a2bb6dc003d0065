//! Localization against building footprints: OSM parsing, wall tracking,
//! point-to-wall registration and an SE(2) Kalman filter over odometry.

mod ekf;
mod localize;
mod osm;
mod register;
mod tracks;

pub use ekf::{check_psd, ekf_predict, ekf_step, ekf_update, LocState};
pub use localize::{localize_sequence, LocFrameReport, LocalizeParams, Localization};
pub use osm::{parse_osm, write_osm, GeoOrigin, MapIndex, WallSegment, EARTH_RADIUS_M};
pub use register::{register_to_map, MapRegParams, MapRegistration};
pub use tracks::{side_of, update_wall_tracks, Side, TrackParams, WallMatch, WallTrack, WallTracks};
