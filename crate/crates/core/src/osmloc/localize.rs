use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ape_report, ApeReport, MATCH_TOLERANCE_S};
use crate::linalg::Mat3;
use crate::odom::{compute_osp_with_ratio, MIN_EIGEN_RATIO};
use crate::osmloc::ekf::{ekf_predict, ekf_update, LocState};
use crate::osmloc::osm::MapIndex;
use crate::osmloc::register::{register_to_map, MapRegParams};
use crate::osmloc::tracks::{update_wall_tracks, TrackParams, WallTracks};
use crate::radarproc::{apply_semantic_mask, k_strongest, MaskMode};
use crate::scalar::Real;
use crate::se2::Pose2;
use crate::types::{ClassRaster, PolarScan, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct LocalizeParams<T> {
    pub k: usize,
    pub min_power: T,
    pub dilation: usize,
    pub cell_size: T,
    pub min_cell_points: usize,
    pub min_eigen_ratio: T,
    /// Grid cell of the wall index; at least twice the match gate.
    pub map_cell: T,
    pub registration: MapRegParams<T>,
    pub tracks: TrackParams,
    /// False runs the filter on odometry alone.
    pub use_map: bool,
    /// Odometry noise: standard deviation per meter travelled, plus a floor
    /// per frame (meters, radians).
    pub odom_sigma_xy_per_m: T,
    pub odom_sigma_theta_per_m: T,
    pub odom_sigma_xy_min: T,
    pub odom_sigma_theta_min: T,
    pub initial_sigma_xy: T,
    pub initial_sigma_theta: T,
    /// Floor on the residual RMS used to scale the correction covariance.
    pub correction_sigma_min: T,
    /// Map-frame pose of the first frame; defaults to the ground truth's
    /// first pose when one is given, else identity.
    pub initial_pose: Option<Pose2<T>>,
}

impl<T: Real> Default for LocalizeParams<T> {
    fn default() -> Self {
        Self {
            k: 12,
            min_power: T::zero(),
            dilation: 1,
            cell_size: T::lit(3.0),
            min_cell_points: 4,
            min_eigen_ratio: T::lit(MIN_EIGEN_RATIO),
            map_cell: T::lit(4.0),
            registration: MapRegParams::default(),
            tracks: TrackParams::default(),
            use_map: true,
            odom_sigma_xy_per_m: T::lit(0.02),
            odom_sigma_theta_per_m: T::lit(0.001),
            odom_sigma_xy_min: T::lit(0.005),
            odom_sigma_theta_min: T::lit(0.0005),
            initial_sigma_xy: T::lit(0.1),
            initial_sigma_theta: T::lit(0.01),
            correction_sigma_min: T::lit(0.05),
            initial_pose: None,
        }
    }
}

impl<T: Real> LocalizeParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.min_cell_points == 0 || !(self.cell_size > T::zero()) {
            return Err(Error::Invalid("k, min_cell_points and cell_size must be positive".into()));
        }
        let sig = [
            self.odom_sigma_xy_per_m,
            self.odom_sigma_theta_per_m,
            self.odom_sigma_xy_min,
            self.odom_sigma_theta_min,
            self.initial_sigma_xy,
            self.initial_sigma_theta,
            self.correction_sigma_min,
        ];
        if sig.iter().any(|s| !(*s >= T::zero())) {
            return Err(Error::Invalid("noise levels must be non-negative".into()));
        }
        if !(self.map_cell >= self.registration.match_gate * T::lit(2.0)) {
            return Err(Error::Invalid("map_cell must be at least twice the registration match gate".into()));
        }
        self.registration.validate()?;
        self.tracks.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocFrameReport {
    pub timestamp_s: f64,
    pub features: usize,
    pub matches: usize,
    pub condition: f64,
    pub rank_deficient: bool,
    pub confident: bool,
    /// A map correction was fused this frame.
    pub applied: bool,
    /// Size of the registration's correction, meters.
    pub correction_m: f64,
    pub sigma_xy_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_m: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Localization<T> {
    pub trajectory: Trajectory<T>,
    pub frames: Vec<LocFrameReport>,
    pub tracks: WallTracks,
    /// Present when ground truth was supplied.
    pub ape: Option<ApeReport>,
}

fn frame_err(i: usize, reason: String) -> Error {
    Error::Frame {
        frame: i.to_string(),
        reason,
    }
}

/// Filters odometry against the wall map, one scan at a time. Scans and
/// rasters pair by index and must share timestamps; each scan needs an
/// odometry pose within the stamp tolerance.
pub fn localize_sequence<T: Real>(
    scans: &[PolarScan<T>],
    rasters: &[ClassRaster<T>],
    odometry: &Trajectory<T>,
    map: &MapIndex<T>,
    params: &LocalizeParams<T>,
    ground_truth: Option<&Trajectory<T>>,
) -> Result<Localization<T>> {
    params.validate()?;
    if map.cell() < params.registration.match_gate * T::lit(2.0) {
        return Err(Error::Invalid("map index cell must be at least twice the match gate".into()));
    }
    if scans.len() != rasters.len() {
        return Err(frame_err(
            scans.len().min(rasters.len()),
            format!("{} scans but {} rasters", scans.len(), rasters.len()),
        ));
    }
    let mut odom_idx = Vec::with_capacity(scans.len());
    for (i, (s, r)) in scans.iter().zip(rasters).enumerate() {
        if (s.timestamp - r.timestamp).abs() > MATCH_TOLERANCE_S {
            return Err(frame_err(i, format!("scan at {} s but raster at {} s", s.timestamp, r.timestamp)));
        }
        if i > 0 && !(s.timestamp > scans[i - 1].timestamp) {
            return Err(frame_err(i, "scan timestamps must increase".into()));
        }
        s.grid.ensure_matches(&r.grid)?;
        let j = odometry
            .nearest(s.timestamp, MATCH_TOLERANCE_S)
            .ok_or_else(|| frame_err(i, format!("no odometry pose near {} s", s.timestamp)))?;
        odom_idx.push(j);
    }

    let initial = params
        .initial_pose
        .or_else(|| ground_truth.and_then(|g| g.poses().first().copied()))
        .unwrap_or_else(Pose2::identity);
    let (sx, st) = (params.initial_sigma_xy, params.initial_sigma_theta);
    let mut state = LocState::new(initial, Mat3::diag([sx * sx, sx * sx, st * st]))?;
    let mut tracks = WallTracks::new(params.tracks)?;
    let mut trajectory = Trajectory::new();
    let mut frames = Vec::with_capacity(scans.len());

    for (i, (scan, raster)) in scans.iter().zip(rasters).enumerate() {
        let delta = if i == 0 {
            Pose2::identity()
        } else {
            odometry.poses()[odom_idx[i - 1]].between(&odometry.poses()[odom_idx[i]])
        };
        let d = delta.translation_norm();
        let sxy = params.odom_sigma_xy_min + params.odom_sigma_xy_per_m * d;
        let sth = params.odom_sigma_theta_min + params.odom_sigma_theta_per_m * d;
        let q = if i == 0 { Mat3::zeros() } else { Mat3::diag([sxy * sxy, sxy * sxy, sth * sth]) };
        state = ekf_predict(&state, &delta, &q)?;

        let mut report = LocFrameReport {
            timestamp_s: scan.timestamp,
            features: 0,
            matches: 0,
            condition: f64::INFINITY,
            rank_deficient: true,
            confident: false,
            applied: false,
            correction_m: 0.0,
            sigma_xy_m: 0.0,
            error_m: None,
        };
        if params.use_map {
            let points = k_strongest(scan, params.k, params.min_power)?;
            let points = apply_semantic_mask(&points, raster, MaskMode::OnlyBuilding, params.dilation)?;
            let features = compute_osp_with_ratio(&points.xy(), params.cell_size, params.min_cell_points, params.min_eigen_ratio)?;
            report.features = features.len();
            let reg = register_to_map(&features, map, &tracks, &state.mean, &params.registration)?;
            report.matches = reg.matches.len();
            report.condition = reg.condition.as_f64();
            report.rank_deficient = reg.rank_deficient;
            report.confident = reg.confident;
            report.correction_m = reg.correction.translation_norm().as_f64();
            if reg.confident {
                if let Some(r) = reg.covariance(params.correction_sigma_min) {
                    state = ekf_update(&state, &reg.pose, &r)?;
                    report.applied = true;
                }
            }
            update_wall_tracks(&mut tracks, &reg.matches, &state.mean);
        }
        report.sigma_xy_m = (state.cov.0[0][0] + state.cov.0[1][1]).as_f64().max(0.0).sqrt();
        if let Some(gt) = ground_truth {
            if let Some(j) = gt.nearest(scan.timestamp, MATCH_TOLERANCE_S) {
                let g = gt.poses()[j];
                report.error_m = Some((state.mean.x - g.x).as_f64().hypot((state.mean.y - g.y).as_f64()));
            }
        }
        trajectory.push(scan.timestamp, state.mean)?;
        frames.push(report);
    }
    let ape = match ground_truth {
        Some(gt) => Some(ape_report(&trajectory, gt)?),
        None => None,
    };
    Ok(Localization {
        trajectory,
        frames,
        tracks,
        ape,
    })
}
