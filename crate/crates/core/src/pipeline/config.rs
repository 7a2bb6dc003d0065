use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::desk_lengths;
use crate::io::GridFile;
use crate::odom::OdometryParams;
use crate::osmloc::{GeoOrigin, LocalizeParams};
use crate::preprocess::{ExtrinsicFile, FovSpec, LabelMap16to4};
use crate::refine::RefineParams;
use crate::synthworld::{CorruptionSpec, LayoutParams, LidarSensor, RadarSensor, TrajectoryKind};

/// Existing inputs. Any stage whose input is produced by an earlier enabled
/// stage ignores the matching entry here.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetPaths {
    /// Directory of `.lpc` LiDAR frames.
    pub lidar_dir: Option<PathBuf>,
    /// Directory of `.psc` radar scans.
    pub scans_dir: Option<PathBuf>,
    /// Directory of `.crs` radar-frame rasters, one per scan.
    pub rasters_dir: Option<PathBuf>,
    /// Per-frame sensor poses (trajectory CSV); stamps and window poses
    /// for projection.
    pub poses: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    /// Odometry trajectory for localization when the odometry stage is off.
    pub odometry: Option<PathBuf>,
    pub imu: Option<PathBuf>,
    pub map: Option<PathBuf>,
    /// `"lat,lon"` of the map's tangent-plane origin.
    pub origin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthStage {
    pub enabled: bool,
    /// Scene JSON; when absent a street scene is laid out along the path.
    pub scene: Option<PathBuf>,
    pub layout: LayoutParams,
    pub trajectory: TrajectoryKind,
    pub length_m: f64,
    pub speed_m_s: f64,
    pub dt_s: f64,
    /// Simulate LiDAR frames as well as radar.
    pub lidar: bool,
    pub lidar_sensor: LidarSensor,
    pub radar_sensor: RadarSensor,
    pub corruption: CorruptionSpec,
    /// Tangent-plane origin the synthetic map is written about.
    pub origin: String,
}

impl Default for SynthStage {
    fn default() -> Self {
        Self {
            enabled: false,
            scene: None,
            layout: LayoutParams::default(),
            trajectory: TrajectoryKind::SquareLoop,
            length_m: 200.0,
            speed_m_s: 5.0,
            dt_s: 0.25,
            lidar: true,
            lidar_sensor: LidarSensor::default(),
            radar_sensor: RadarSensor::default(),
            corruption: CorruptionSpec::default(),
            origin: "48.137,11.575".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessStage {
    pub enabled: bool,
    /// LiDAR-to-radar transform; identity when absent.
    pub extrinsic: Option<ExtrinsicFile>,
    /// Full vertical opening of the radar, degrees. The gate is applied
    /// right before projection so refinement sees the whole cloud.
    pub fov_deg: f64,
    pub min_range_m: f64,
    pub max_range_m: f64,
    pub ground_cell_m: f64,
    pub ground_margin_m: f64,
    /// Source-id to class table; absent means the clouds already carry the
    /// four-class ids.
    pub label_map: Option<serde_json::Value>,
}

impl Default for PreprocessStage {
    fn default() -> Self {
        Self {
            enabled: false,
            extrinsic: None,
            fov_deg: 10.0,
            min_range_m: 2.0,
            max_range_m: 80.0,
            ground_cell_m: 1.0,
            ground_margin_m: 0.3,
            label_map: None,
        }
    }
}

impl PreprocessStage {
    pub fn fov(&self) -> Result<FovSpec<f64>> {
        FovSpec::new((0.5 * self.fov_deg).to_radians(), self.min_range_m, self.max_range_m)
    }

    pub fn label_map(&self) -> Result<Option<LabelMap16to4>> {
        self.label_map.as_ref().map(LabelMap16to4::from_json).transpose()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineStage {
    pub enabled: bool,
    pub params: RefineParams<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectStage {
    pub enabled: bool,
    pub grid: GridFile,
    /// Frames accumulated on each side of the reference frame.
    pub window: usize,
    /// Frame spacing used for raster stamps when no poses are available.
    pub frame_dt_s: f64,
}

impl Default for ProjectStage {
    fn default() -> Self {
        let r = RadarSensor::default();
        Self {
            enabled: false,
            grid: GridFile {
                azimuth_bins: r.azimuth_bins,
                range_bins: r.range_bins,
                range_resolution_m: r.range_resolution,
            },
            window: 0,
            frame_dt_s: 0.25,
        }
    }
}

/// Where odometry and localization take their semantic rasters from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RasterSource {
    None,
    /// The simulator's rasters or `dataset.rasters_dir`.
    #[default]
    Dataset,
    /// The projection stage's output.
    Projected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdomStage {
    pub enabled: bool,
    pub params: OdometryParams<f64>,
    pub use_imu: bool,
    pub rasters: RasterSource,
}

impl Default for OdomStage {
    fn default() -> Self {
        Self {
            enabled: false,
            params: OdometryParams::default(),
            use_imu: false,
            rasters: RasterSource::Dataset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocateStage {
    pub enabled: bool,
    pub params: LocalizeParams<f64>,
    pub rasters: RasterSource,
}

impl Default for LocateStage {
    fn default() -> Self {
        Self {
            enabled: false,
            params: LocalizeParams::default(),
            rasters: RasterSource::Dataset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalStage {
    pub enabled: bool,
    /// Drift subsequence lengths, meters.
    pub lengths: Vec<f64>,
    pub plots: bool,
}

impl Default for EvalStage {
    fn default() -> Self {
        Self {
            enabled: false,
            lengths: desk_lengths(),
            plots: true,
        }
    }
}

/// One experiment: stage switches and parameters, inputs, seed and output
/// directory. Every field is echoed into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for per-frame parallelism; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub dataset: DatasetPaths,
    #[serde(default)]
    pub synth: SynthStage,
    #[serde(default)]
    pub preprocess: PreprocessStage,
    #[serde(default)]
    pub refine: RefineStage,
    #[serde(default)]
    pub project: ProjectStage,
    #[serde(default)]
    pub odom: OdomStage,
    #[serde(default)]
    pub locate: LocateStage,
    #[serde(default)]
    pub eval: EvalStage,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

fn must_exist(p: &Option<PathBuf>, what: &str) -> Result<()> {
    match p {
        Some(p) if !p.exists() => Err(invalid(format!("dataset.{what} {} does not exist", p.display()))),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    /// A config with every stage off.
    pub fn new(seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            seed,
            output_dir: output_dir.into(),
            workers: 0,
            dataset: DatasetPaths::default(),
            synth: SynthStage::default(),
            preprocess: PreprocessStage::default(),
            refine: RefineStage::default(),
            project: ProjectStage::default(),
            odom: OdomStage::default(),
            locate: LocateStage::default(),
            eval: EvalStage::default(),
        }
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        Ok(serde_json::from_value(value)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }

    pub(crate) fn has_lidar(&self) -> bool {
        (self.synth.enabled && self.synth.lidar) || self.dataset.lidar_dir.is_some()
    }

    pub(crate) fn has_scans(&self) -> bool {
        self.synth.enabled || self.dataset.scans_dir.is_some()
    }

    pub(crate) fn has_ground_truth(&self) -> bool {
        self.synth.enabled || self.dataset.ground_truth.is_some()
    }

    pub(crate) fn has_rasters(&self, source: RasterSource) -> bool {
        match source {
            RasterSource::None => true,
            RasterSource::Dataset => self.synth.enabled || self.dataset.rasters_dir.is_some(),
            RasterSource::Projected => self.project.enabled,
        }
    }

    pub(crate) fn origin(&self) -> Result<GeoOrigin> {
        match (&self.dataset.origin, self.synth.enabled) {
            (Some(o), false) => GeoOrigin::parse(o),
            (_, true) => GeoOrigin::parse(&self.synth.origin),
            (None, false) => Err(invalid("localization needs dataset.origin")),
        }
    }

    /// Parameter ranges, input paths and stage dependencies.
    pub fn validate(&self) -> Result<()> {
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir must be set"));
        }
        let d = &self.dataset;
        for (p, what) in [
            (&d.lidar_dir, "lidar_dir"),
            (&d.scans_dir, "scans_dir"),
            (&d.rasters_dir, "rasters_dir"),
            (&d.poses, "poses"),
            (&d.ground_truth, "ground_truth"),
            (&d.odometry, "odometry"),
            (&d.imu, "imu"),
            (&d.map, "map"),
        ] {
            must_exist(p, what)?;
        }
        if self.synth.enabled {
            let s = &self.synth;
            must_exist(&s.scene, "synth.scene")?;
            if !(s.length_m > 0.0 && s.speed_m_s > 0.0 && s.dt_s > 0.0) {
                return Err(invalid("synth length, speed and dt must be positive"));
            }
            s.corruption.validate()?;
            s.radar_sensor.grid::<f64>()?;
            GeoOrigin::parse(&s.origin)?;
        }
        if self.preprocess.enabled {
            if !self.has_lidar() {
                return Err(invalid("preprocess needs LiDAR frames (synth.lidar or dataset.lidar_dir)"));
            }
            self.preprocess.fov()?;
            self.preprocess.label_map()?;
            if let Some(e) = &self.preprocess.extrinsic {
                e.to_extrinsic::<f64>()?;
            }
            if !(self.preprocess.ground_cell_m > 0.0 && self.preprocess.ground_margin_m >= 0.0) {
                return Err(invalid("ground cell must be positive and margin non-negative"));
            }
        }
        if self.refine.enabled {
            if !self.has_lidar() {
                return Err(invalid("refine needs LiDAR frames"));
            }
            self.refine.params.validate()?;
        }
        if self.project.enabled {
            if !self.has_lidar() {
                return Err(invalid("project needs LiDAR frames"));
            }
            self.project.grid.grid::<f64>()?;
            if !(self.project.frame_dt_s > 0.0) {
                return Err(invalid("project.frame_dt_s must be positive"));
            }
            if self.project.window > 0 && !(self.synth.enabled || d.poses.is_some()) {
                return Err(invalid("window accumulation needs frame poses (dataset.poses)"));
            }
        }
        if self.odom.enabled {
            if !self.has_scans() {
                return Err(invalid("odom needs radar scans (synth or dataset.scans_dir)"));
            }
            if !self.has_rasters(self.odom.rasters) {
                return Err(invalid("odom raster source is not available"));
            }
            if self.odom.use_imu && !(self.synth.enabled || d.imu.is_some()) {
                return Err(invalid("odom.use_imu needs gyro data (dataset.imu)"));
            }
            self.odom.params.validate()?;
        }
        if self.locate.enabled {
            if !self.has_scans() {
                return Err(invalid("locate needs radar scans"));
            }
            if self.locate.rasters == RasterSource::None || !self.has_rasters(self.locate.rasters) {
                return Err(invalid("locate needs building rasters"));
            }
            if !(self.odom.enabled || d.odometry.is_some()) {
                return Err(invalid("locate needs odometry (odom stage or dataset.odometry)"));
            }
            if !(self.synth.enabled || d.map.is_some()) {
                return Err(invalid("locate needs a map (dataset.map)"));
            }
            self.origin()?;
            self.locate.params.validate()?;
        }
        if self.eval.enabled {
            if !self.has_ground_truth() {
                return Err(invalid("eval needs ground truth"));
            }
            if self.eval.lengths.is_empty() || self.eval.lengths.iter().any(|l| !(*l > 0.0)) {
                return Err(invalid("eval lengths must be positive and non-empty"));
            }
        }
        Ok(())
    }
}
