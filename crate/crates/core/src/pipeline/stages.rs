use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{ape_report, iou, kitti_drift, plot, ApeReport, DriftResult};
use crate::io::{
    list_files, read_crs, read_imu, read_lpc, read_lpc_raw, read_psc, read_trajectory, read_truth, sidecar_path, truth_path,
    write_atomic, write_crs, write_json, write_lpc, write_trajectory, write_truth, ImuSample,
};
use crate::odom::{FrameReport, RadarOdometry};
use crate::osmloc::{localize_sequence, parse_osm, LocFrameReport, MapIndex};
use crate::pipeline::config::{ExperimentConfig, RasterSource};
use crate::pipeline::manifest::RunDir;
use crate::pipeline::synth::{frame_name, write_synthetic};
use crate::preprocess::{align_to_radar, consolidate_labels, fov_filter, remove_ground, Extrinsic};
use crate::project::{accumulate_window, project_all, WindowSpec};
use crate::refine::{refine_labels, RefineReport};
use crate::types::{ClassRaster, LabeledCloud, PolarScan, SemanticClass, Trajectory};

/// Error inside a stage, with the frame it happened on when known.
#[derive(Debug)]
pub(crate) struct StageFailure {
    pub frame: Option<String>,
    pub error: Error,
}

impl From<Error> for StageFailure {
    fn from(error: Error) -> Self {
        let frame = match &error {
            Error::Frame { frame, .. } => Some(frame.clone()),
            _ => None,
        };
        Self { frame, error }
    }
}

pub(crate) type StageResult<T> = std::result::Result<T, StageFailure>;

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Runs `f` on every file in parallel; the first failure in file order
/// names its frame.
fn per_frame<T: Send>(files: &[PathBuf], f: impl Fn(&Path) -> Result<T> + Sync) -> StageResult<Vec<T>> {
    let out: Vec<Result<T>> = files.par_iter().map(|p| f(p)).collect();
    let mut ok = Vec::with_capacity(out.len());
    for (p, r) in files.iter().zip(out) {
        match r {
            Ok(v) => ok.push(v),
            Err(error) => {
                return Err(StageFailure {
                    frame: Some(stem(p)),
                    error,
                })
            }
        }
    }
    Ok(ok)
}

/// Inputs resolved so far: dataset entries, replaced by stage outputs as
/// stages run.
#[derive(Debug, Default)]
pub(crate) struct Inputs {
    pub lidar: Option<PathBuf>,
    pub scans: Option<PathBuf>,
    pub rasters: Option<PathBuf>,
    pub projected: Option<PathBuf>,
    pub poses: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub imu: Option<PathBuf>,
    pub map: Option<PathBuf>,
    pub odometry: Option<PathBuf>,
    pub located: Option<PathBuf>,
}

impl Inputs {
    pub fn from_dataset(cfg: &ExperimentConfig) -> Self {
        let d = &cfg.dataset;
        Self {
            lidar: d.lidar_dir.clone(),
            scans: d.scans_dir.clone(),
            rasters: d.rasters_dir.clone(),
            projected: None,
            poses: d.poses.clone(),
            ground_truth: d.ground_truth.clone(),
            imu: d.imu.clone(),
            map: d.map.clone(),
            odometry: d.odometry.clone(),
            located: None,
        }
    }

    fn need<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
        p.as_ref().ok_or_else(|| Error::Invalid(format!("no {what} available")))
    }

    fn raster_dir(&self, source: RasterSource) -> Result<Option<&PathBuf>> {
        Ok(match source {
            RasterSource::None => None,
            RasterSource::Dataset => Some(Self::need(&self.rasters, "rasters")?),
            RasterSource::Projected => Some(Self::need(&self.projected, "projected rasters")?),
        })
    }
}

pub(crate) fn synth(cfg: &ExperimentConfig, dir: &mut RunDir, inputs: &mut Inputs) -> StageResult<usize> {
    let out = write_synthetic(&cfg.synth, cfg.seed, &dir.path("synth"))?;
    for f in &out.files {
        dir.track(f)?;
    }
    inputs.lidar = out.lidar_dir.or(inputs.lidar.take());
    inputs.scans = Some(out.scans_dir);
    inputs.rasters = Some(out.rasters_dir);
    inputs.poses = Some(out.trajectory.clone());
    inputs.ground_truth = Some(out.trajectory);
    inputs.imu = Some(out.imu);
    inputs.map = Some(out.map);
    Ok(out.frames)
}

fn labels_from_ids(ids: &[u8], path: &Path) -> Result<Vec<SemanticClass>> {
    ids.iter()
        .map(|&id| {
            SemanticClass::from_id(id).ok_or_else(|| Error::Format {
                kind: "lpc",
                path: path.to_path_buf(),
                reason: format!("class id {id} without a label map"),
            })
        })
        .collect()
}

/// Aligns, removes ground and consolidates labels. True-label sidecars go
/// through the same (label-independent) point selection.
pub(crate) fn preprocess(cfg: &ExperimentConfig, dir: &mut RunDir, inputs: &mut Inputs) -> StageResult<usize> {
    let p = &cfg.preprocess;
    let files = list_files(Inputs::need(&inputs.lidar, "LiDAR frames")?, "lpc")?;
    let map = p.label_map()?;
    let extrinsic = match &p.extrinsic {
        Some(e) => e.to_extrinsic::<f64>()?,
        None => Extrinsic::identity(),
    };
    let out = dir.path("preprocess");
    let written = per_frame(&files, |f| {
        let (points, ids) = read_lpc_raw::<f64>(f)?;
        let truth = read_truth(f, points.len())?;
        let cloud = match &map {
            Some(m) => consolidate_labels(points, &ids, m)?,
            None => LabeledCloud::new(points, labels_from_ids(&ids, f)?)?,
        };
        let aligned = align_to_radar(&cloud, &extrinsic);
        let kept = remove_ground(&aligned, p.ground_cell_m, p.ground_margin_m)?;
        let path = out.join(f.file_name().expect("listed file"));
        write_lpc(&path, &kept)?;
        let mut paths = vec![path.clone()];
        if let Some(t) = truth {
            let t = remove_ground(&aligned.with_labels(t)?, p.ground_cell_m, p.ground_margin_m)?;
            write_truth(&path, t.labels())?;
            paths.push(truth_path(&path));
        }
        Ok(paths)
    })?;
    for p in written.iter().flatten() {
        dir.track(p)?;
    }
    inputs.lidar = Some(out);
    Ok(files.len())
}

#[derive(Debug, Clone, Default, Serialize)]
struct LabelScore {
    points: usize,
    /// Points whose input label differed from the truth.
    wrong_before: usize,
    wrong_after: usize,
    /// Wrong before, right after.
    restored: usize,
    /// Right before, wrong after.
    corrupted: usize,
}

impl LabelScore {
    fn new(before: &[SemanticClass], after: &[SemanticClass], truth: &[SemanticClass]) -> Self {
        let mut s = Self {
            points: truth.len(),
            ..Self::default()
        };
        for ((b, a), t) in before.iter().zip(after).zip(truth) {
            s.wrong_before += (b != t) as usize;
            s.wrong_after += (a != t) as usize;
            s.restored += (b != t && a == t) as usize;
            s.corrupted += (b == t && a != t) as usize;
        }
        s
    }

    fn add(&mut self, o: &Self) {
        self.points += o.points;
        self.wrong_before += o.wrong_before;
        self.wrong_after += o.wrong_after;
        self.restored += o.restored;
        self.corrupted += o.corrupted;
    }

    fn accuracy_after(&self) -> f64 {
        if self.points == 0 {
            1.0
        } else {
            1.0 - self.wrong_after as f64 / self.points as f64
        }
    }
}

#[derive(Debug, Serialize)]
struct RefineFrame {
    frame: String,
    relabels: RefineReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<LabelScore>,
}

#[derive(Debug, Serialize)]
pub(crate) struct RefineSummary {
    frames: Vec<RefineFrame>,
    pass1_total: usize,
    pass2_total: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<LabelScore>,
    /// Fraction of points whose label matches the truth after refinement.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

pub(crate) fn refine(cfg: &ExperimentConfig, dir: &mut RunDir, inputs: &mut Inputs) -> StageResult<usize> {
    let files = list_files(Inputs::need(&inputs.lidar, "LiDAR frames")?, "lpc")?;
    let out = dir.path("refine");
    let frames = per_frame(&files, |f| {
        let cloud = read_lpc::<f64>(f)?;
        let truth = read_truth(f, cloud.len())?;
        let (refined, report) = refine_labels(&cloud, &cfg.refine.params)?;
        let path = out.join(f.file_name().expect("listed file"));
        write_lpc(&path, &refined)?;
        let mut paths = vec![path.clone()];
        let score = match truth {
            Some(t) => {
                write_truth(&path, &t)?;
                paths.push(truth_path(&path));
                Some(LabelScore::new(cloud.labels(), refined.labels(), &t))
            }
            None => None,
        };
        Ok((
            paths,
            RefineFrame {
                frame: stem(f),
                relabels: report,
                score,
            },
        ))
    })?;
    let mut summary = RefineSummary {
        frames: Vec::with_capacity(frames.len()),
        pass1_total: 0,
        pass2_total: 0,
        score: None,
        accuracy: None,
    };
    for (paths, frame) in frames {
        for p in &paths {
            dir.track(p)?;
        }
        summary.pass1_total += frame.relabels.pass1_total();
        summary.pass2_total += frame.relabels.pass2_total();
        if let Some(s) = &frame.score {
            summary.score.get_or_insert_with(LabelScore::default).add(s);
        }
        summary.frames.push(frame);
    }
    summary.accuracy = summary.score.as_ref().map(LabelScore::accuracy_after);
    let report = dir.path("refine/report.json");
    write_json(&report, &summary)?;
    dir.track(&report)?;
    inputs.lidar = Some(out);
    Ok(files.len())
}

/// Frame stamps and poses for `n` clouds: from the pose file when it has
/// one row per frame, else evenly spaced stamps and no poses.
fn frame_poses(inputs: &Inputs, n: usize, dt: f64) -> Result<(Vec<f64>, Option<Trajectory<f64>>)> {
    if let Some(p) = &inputs.poses {
        let traj = read_trajectory::<f64>(p)?;
        if traj.len() == n {
            return Ok((traj.stamps().to_vec(), Some(traj)));
        }
    }
    Ok(((0..n).map(|i| i as f64 * dt).collect(), None))
}

/// Radar field-of-view gate, then one raster per frame, optionally
/// accumulating neighbouring frames.
pub(crate) fn project(cfg: &ExperimentConfig, dir: &mut RunDir, inputs: &mut Inputs) -> StageResult<usize> {
    let p = &cfg.project;
    let grid = p.grid.grid::<f64>()?;
    let fov = if cfg.preprocess.enabled {
        Some(cfg.preprocess.fov()?)
    } else {
        None
    };
    let files = list_files(Inputs::need(&inputs.lidar, "LiDAR frames")?, "lpc")?;
    let (stamps, poses) = frame_poses(inputs, files.len(), p.frame_dt_s)?;
    if p.window > 0 && poses.is_none() {
        return Err(Error::Invalid(format!("window accumulation needs one pose per frame ({} frames)", files.len())).into());
    }
    let indexed: Vec<(usize, PathBuf)> = files.iter().cloned().enumerate().collect();
    let single: Vec<ClassRaster<f64>> = per_frame(&files, |f| {
        let i = indexed.iter().position(|(_, g)| g == f).expect("listed file");
        let mut cloud = read_lpc::<f64>(f)?;
        if let Some(fov) = &fov {
            cloud = fov_filter(&cloud, fov);
        }
        project_all(&cloud, &grid, stamps[i])
    })?;
    let out = dir.path("project");
    let written = per_frame(&files, |f| {
        let i = indexed.iter().position(|(_, g)| g == f).expect("listed file");
        let raster = match &poses {
            Some(traj) if p.window > 0 => {
                let lo = i.saturating_sub(p.window);
                let hi = (i + p.window).min(files.len() - 1);
                let neighbors: Vec<usize> = (lo..=hi).filter(|&j| j != i).collect();
                let window = WindowSpec {
                    frames_before: i - lo,
                    frames_after: hi - i,
                    relative_poses: neighbors.iter().map(|&j| traj.poses()[i].between(&traj.poses()[j])).collect(),
                };
                let rasters: Vec<ClassRaster<f64>> = neighbors.iter().map(|&j| single[j].clone()).collect();
                accumulate_window(&single[i], &rasters, &window)?
            }
            _ => single[i].clone(),
        };
        let path = out.join(format!("{}.crs", stem(f)));
        write_crs(&path, &raster)?;
        Ok(path)
    })?;
    for p in &written {
        dir.track(p)?;
        dir.track(&sidecar_path(p))?;
    }
    inputs.projected = Some(out);
    Ok(files.len())
}

fn load_frames(scans_dir: &Path, rasters_dir: Option<&PathBuf>) -> StageResult<(Vec<PolarScan<f64>>, Option<Vec<ClassRaster<f64>>>)> {
    let scan_files = list_files(scans_dir, "psc")?;
    let scans = per_frame(&scan_files, read_psc::<f64>)?;
    let rasters = match rasters_dir {
        Some(d) => {
            let raster_files = list_files(d, "crs")?;
            if raster_files.len() != scan_files.len() {
                return Err(StageFailure {
                    frame: Some(stem(scan_files.get(raster_files.len()).or(raster_files.last()).unwrap_or(&d.clone()))),
                    error: Error::Invalid(format!("{} scans but {} rasters", scan_files.len(), raster_files.len())),
                });
            }
            Some(per_frame(&raster_files, read_crs::<f64>)?)
        }
        None => None,
    };
    Ok((scans, rasters))
}

#[derive(Debug, Serialize)]
struct OdomReport<'a> {
    frames: usize,
    fallbacks: usize,
    keyframes: usize,
    reports: &'a [FrameReport],
}

pub(crate) fn odom(cfg: &ExperimentConfig, dir: &mut RunDir, inputs: &mut Inputs) -> StageResult<usize> {
    let o = &cfg.odom;
    let (scans, rasters) = load_frames(Inputs::need(&inputs.scans, "radar scans")?, inputs.raster_dir(o.rasters)?)?;
    let imu: Option<Vec<ImuSample>> = if o.use_imu {
        Some(read_imu(Inputs::need(&inputs.imu, "gyro samples")?)?)
    } else {
        None
    };
    let mut odo = RadarOdometry::new(o.params)?;
    for (i, scan) in scans.iter().enumerate() {
        let raster = rasters.as_ref().map(|r| &r[i]);
        odo.step(scan, raster, imu.as_deref()).map_err(|error| StageFailure {
            frame: Some(frame_name(i)),
            error,
        })?;
    }
    let (traj, reports) = odo.into_parts();
    let path = dir.path("odom/traj.csv");
    write_trajectory(&path, &traj)?;
    dir.track(&path)?;
    let report = dir.path("odom/report.json");
    write_json(
        &report,
        &OdomReport {
            frames: reports.len(),
            fallbacks: reports.iter().filter(|r| r.fallback).count(),
            keyframes: reports.iter().filter(|r| r.keyframe).count(),
            reports: &reports,
        },
    )?;
    dir.track(&report)?;
    inputs.odometry = Some(path);
    Ok(scans.len())
}

#[derive(Debug, Serialize)]
struct LocateReport {
    frames: usize,
    corrections_applied: usize,
    walls_tracked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    ape: Option<ApeReport>,
    reports: Vec<LocFrameReport>,
}

pub(crate) fn locate(cfg: &ExperimentConfig, dir: &mut RunDir, inputs: &mut Inputs) -> StageResult<usize> {
    let l = &cfg.locate;
    let (scans, rasters) = load_frames(Inputs::need(&inputs.scans, "radar scans")?, inputs.raster_dir(l.rasters)?)?;
    let rasters = rasters.ok_or_else(|| Error::Invalid("localization needs rasters".into()))?;
    let odometry = read_trajectory::<f64>(Inputs::need(&inputs.odometry, "odometry")?)?;
    let map_path = Inputs::need(&inputs.map, "map")?;
    let doc = std::fs::read_to_string(map_path).map_err(|e| Error::Io {
        path: map_path.clone(),
        source: e,
    })?;
    let walls = parse_osm::<f64>(&doc, &cfg.origin()?)?;
    let index = MapIndex::new(walls, l.params.map_cell)?;
    let gt = match &inputs.ground_truth {
        Some(p) => Some(read_trajectory::<f64>(p)?),
        None => None,
    };
    let loc = localize_sequence(&scans, &rasters, &odometry, &index, &l.params, gt.as_ref())?;
    let path = dir.path("locate/est.csv");
    write_trajectory(&path, &loc.trajectory)?;
    dir.track(&path)?;
    let report = dir.path("locate/report.json");
    write_json(
        &report,
        &LocateReport {
            frames: loc.frames.len(),
            corrections_applied: loc.frames.iter().filter(|f| f.applied).count(),
            walls_tracked: loc.tracks.len(),
            ape: loc.ape.clone(),
            reports: loc.frames,
        },
    )?;
    dir.track(&report)?;
    inputs.located = Some(path);
    Ok(scans.len())
}

#[derive(Debug, Serialize)]
struct ClassIou {
    class: SemanticClass,
    mean_iou: f64,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    odometry_drift: Option<DriftResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    odometry_ape: Option<ApeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    localization_ape: Option<ApeReport>,
    /// Projected LiDAR rasters against the radar-frame rasters.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    raster_iou: Vec<ClassIou>,
}

fn xy(t: &Trajectory<f64>) -> Vec<[f64; 2]> {
    t.poses().iter().map(|p| [p.x, p.y]).collect()
}

pub(crate) fn eval(cfg: &ExperimentConfig, dir: &mut RunDir, inputs: &mut Inputs) -> StageResult<usize> {
    let e = &cfg.eval;
    let gt = read_trajectory::<f64>(Inputs::need(&inputs.ground_truth, "ground truth")?)?;
    let odom = inputs.odometry.as_ref().map(|p| read_trajectory::<f64>(p)).transpose()?;
    let located = inputs.located.as_ref().map(|p| read_trajectory::<f64>(p)).transpose()?;
    let mut report = EvalReport {
        odometry_drift: None,
        odometry_ape: None,
        localization_ape: None,
        raster_iou: Vec::new(),
    };
    if let Some(o) = &odom {
        report.odometry_drift = Some(kitti_drift(o, &gt, &e.lengths)?);
        report.odometry_ape = Some(ape_report(o, &gt)?);
    }
    if let Some(l) = &located {
        report.localization_ape = Some(ape_report(l, &gt)?);
    }
    if let (Some(pred), Some(truth)) = (&inputs.projected, &inputs.rasters) {
        let pred = list_files(pred, "crs")?;
        let truth = list_files(truth, "crs")?;
        if pred.len() == truth.len() && !pred.is_empty() {
            let pairs = per_frame(&pred, |f| {
                let i = pred.iter().position(|g| g == f).expect("listed file");
                let a = read_crs::<f64>(f)?;
                let b = read_crs::<f64>(&truth[i])?;
                SemanticClass::PROJECTED
                    .iter()
                    .map(|&c| iou(a.channel(c).expect("projected"), b.channel(c).expect("projected")))
                    .collect::<Result<Vec<f64>>>()
            })?;
            for (k, &class) in SemanticClass::PROJECTED.iter().enumerate() {
                let mean = pairs.iter().map(|v| v[k]).sum::<f64>() / pairs.len() as f64;
                report.raster_iou.push(ClassIou { class, mean_iou: mean });
            }
        }
    }
    let path = dir.path("eval/report.json");
    write_json(&path, &report)?;
    dir.track(&path)?;
    if e.plots {
        let mut paths = vec![("ground truth", xy(&gt))];
        if let Some(o) = &odom {
            paths.push(("odometry", xy(o)));
        }
        if let Some(l) = &located {
            paths.push(("localization", xy(l)));
        }
        let svg = dir.path("eval/trajectories.svg");
        write_atomic(&svg, plot::trajectory_svg("Trajectories", &paths).as_bytes())?;
        dir.track(&svg)?;
        if let Some(d) = &report.odometry_drift {
            let labels: Vec<String> = d.per_length.iter().map(|l| format!("{} m", l.length_m)).collect();
            let values: Vec<f64> = d.per_length.iter().map(|l| l.translation_pct).collect();
            let svg = dir.path("eval/drift.svg");
            write_atomic(&svg, plot::bars_svg("Translation drift per length", "%", &labels, &[("odometry", values)]).as_bytes())?;
            dir.track(&svg)?;
        }
    }
    Ok(gt.len())
}
