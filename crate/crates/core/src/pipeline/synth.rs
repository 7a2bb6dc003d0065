use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::Result;
use crate::io::{read_json, sidecar_path, truth_path, write_atomic, write_crs, write_imu, write_json, write_lpc, write_psc, write_trajectory, write_truth};
use crate::osmloc::{write_osm, GeoOrigin};
use crate::pipeline::config::SynthStage;
use crate::synthworld::{frame_seed, generate_trajectory, radar_sequence, simulate_lidar, SceneSpec};

/// Where a synthetic dataset landed.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub lidar_dir: Option<PathBuf>,
    pub scans_dir: PathBuf,
    pub rasters_dir: PathBuf,
    pub trajectory: PathBuf,
    pub imu: PathBuf,
    pub map: PathBuf,
    pub scene: PathBuf,
    pub frames: usize,
    /// Every file written, sidecars included, in write order.
    pub files: Vec<PathBuf>,
}

pub(crate) fn frame_name(i: usize) -> String {
    format!("{i:06}")
}

/// Simulates one sequence and writes it under `dir`: `lidar/` clouds with
/// true-label sidecars, `scans/` radar scans, `rasters/` the cells each
/// class returned from, `traj.csv`, `imu.csv`, `scene.json` and `map.osm`
/// with the scene's building footprints.
pub fn write_synthetic(spec: &SynthStage, seed: u64, dir: &Path) -> Result<SynthOutput> {
    let g = generate_trajectory::<f64>(spec.trajectory, spec.length_m, spec.speed_m_s, spec.dt_s)?;
    let scene: SceneSpec = match &spec.scene {
        Some(p) => read_json(p)?,
        None => SceneSpec::along_path(&g.trajectory, &spec.layout, seed)?,
    };
    scene.validate()?;
    let origin = GeoOrigin::parse(&spec.origin)?;
    let mut files = Vec::new();

    let radar = radar_sequence::<f64>(&scene, &g.trajectory, &spec.radar_sensor, seed)?;
    let scans_dir = dir.join("scans");
    let rasters_dir = dir.join("rasters");
    for (i, f) in radar.iter().enumerate() {
        let scan = scans_dir.join(format!("{}.psc", frame_name(i)));
        write_psc(&scan, &f.scan)?;
        let raster = rasters_dir.join(format!("{}.crs", frame_name(i)));
        write_crs(&raster, &f.sources)?;
        files.extend([sidecar_path(&scan), scan, sidecar_path(&raster), raster]);
    }

    let lidar_dir = if spec.lidar {
        let d = dir.join("lidar");
        let poses: Vec<_> = g.trajectory.iter().enumerate().collect();
        // an independent stream from the radar's
        let frames = poses
            .par_iter()
            .map(|&(i, (t, pose))| {
                simulate_lidar::<f64>(&scene, pose, t, &spec.lidar_sensor, &spec.corruption, frame_seed(!seed, i as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, f) in frames.iter().enumerate() {
            let p = d.join(format!("{}.lpc", frame_name(i)));
            write_lpc(&p, &f.cloud)?;
            write_truth(&p, &f.truth)?;
            files.extend([truth_path(&p), p]);
        }
        Some(d)
    } else {
        None
    };

    let trajectory = dir.join("traj.csv");
    write_trajectory(&trajectory, &g.trajectory)?;
    let imu = dir.join("imu.csv");
    write_imu(&imu, &g.imu)?;
    let scene_path = dir.join("scene.json");
    write_json(&scene_path, &scene)?;
    let map = dir.join("map.osm");
    let footprints: Vec<(i64, Vec<[f64; 2]>)> = scene.buildings.iter().map(|b| (b.id, b.footprint.clone())).collect();
    write_atomic(&map, write_osm(&footprints, &origin).as_bytes())?;
    files.extend([trajectory.clone(), imu.clone(), scene_path.clone(), map.clone()]);

    Ok(SynthOutput {
        lidar_dir,
        scans_dir,
        rasters_dir,
        trajectory,
        imu,
        map,
        scene: scene_path,
        frames: radar.len(),
        files,
    })
}
