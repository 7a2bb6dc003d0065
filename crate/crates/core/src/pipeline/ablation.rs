use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{kitti_drift, plot};
use crate::io::ImuSample;
use crate::odom::{OdometryParams, RadarOdometry};
use crate::radarproc::MaskMode;
use crate::types::{ClassRaster, PolarScan, Trajectory};

/// Drift of one mask mode with or without the gyro prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub mode: MaskMode,
    pub imu: bool,
    pub translation_pct: f64,
    pub rotation_deg_per_100m: f64,
    pub best_translation: bool,
    pub best_rotation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub cells: Vec<AblationCell>,
}

impl AblationTable {
    pub fn cell(&self, mode: MaskMode, imu: bool) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.mode == mode && c.imu == imu)
    }

    /// The cell with the lowest translational drift; ties go to the first.
    pub fn best(&self) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.best_translation)
    }

    /// Markdown table, best values in bold.
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| mask | IMU | translation % | rotation deg/100 m |\n|---|---|---:|---:|\n");
        let bold = |v: f64, b: bool| if b { format!("**{v:.3}**") } else { format!("{v:.3}") };
        for c in &self.cells {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} |",
                c.mode.label(),
                if c.imu { "on" } else { "off" },
                bold(c.translation_pct, c.best_translation),
                bold(c.rotation_deg_per_100m, c.best_rotation)
            );
        }
        s
    }

    pub fn to_svg(&self) -> String {
        let labels: Vec<String> = self.cells.iter().map(|c| format!("{} / IMU {}", c.mode.label(), if c.imu { "on" } else { "off" })).collect();
        let t: Vec<f64> = self.cells.iter().map(|c| c.translation_pct).collect();
        let r: Vec<f64> = self.cells.iter().map(|c| c.rotation_deg_per_100m).collect();
        plot::bar_line_svg("Odometry drift by mask", &labels, ("translation %", &t), ("rotation deg/100 m", &r))
    }
}

fn run_cell(
    scans: &[PolarScan<f64>],
    rasters: &[ClassRaster<f64>],
    imu: Option<&[ImuSample]>,
    params: OdometryParams<f64>,
) -> Result<Trajectory<f64>> {
    let mut odo = RadarOdometry::new(params)?;
    for (scan, raster) in scans.iter().zip(rasters) {
        odo.step(scan, Some(raster), imu)?;
    }
    Ok(odo.into_parts().0)
}

/// Runs odometry for every (mode, imu) pair and scores its drift against
/// `gt`. Cells run in parallel; row order follows `modes` then `imus`.
#[allow(clippy::too_many_arguments)]
pub fn ablation_table(
    scans: &[PolarScan<f64>],
    rasters: &[ClassRaster<f64>],
    gt: &Trajectory<f64>,
    imu: &[ImuSample],
    base: &OdometryParams<f64>,
    modes: &[MaskMode],
    imus: &[bool],
    lengths: &[f64],
) -> Result<AblationTable> {
    if modes.is_empty() || imus.is_empty() {
        return Err(Error::Invalid("ablation needs at least one mask mode and one IMU setting".into()));
    }
    if scans.len() != rasters.len() {
        return Err(Error::Invalid(format!("{} scans but {} rasters", scans.len(), rasters.len())));
    }
    if imus.contains(&true) && imu.is_empty() {
        return Err(Error::Invalid("IMU cells need gyro samples".into()));
    }
    let pairs: Vec<(MaskMode, bool)> = modes.iter().flat_map(|&m| imus.iter().map(move |&i| (m, i))).collect();
    let mut cells = pairs
        .par_iter()
        .map(|&(mode, with_imu)| {
            let params = OdometryParams { mode, ..*base };
            let est = run_cell(scans, rasters, with_imu.then_some(imu), params)?;
            let d = kitti_drift(&est, gt, lengths)?;
            Ok(AblationCell {
                mode,
                imu: with_imu,
                translation_pct: d.translation_error,
                rotation_deg_per_100m: d.rotation_error,
                best_translation: false,
                best_rotation: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmin = |cells: &[AblationCell], f: fn(&AblationCell) -> f64| {
        cells
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, c)| match best {
                Some((_, v)) if v <= f(c) => best,
                _ => Some((i, f(c))),
            })
            .map(|(i, _)| i)
    };
    if let Some(i) = argmin(&cells, |c| c.translation_pct) {
        cells[i].best_translation = true;
    }
    if let Some(i) = argmin(&cells, |c| c.rotation_deg_per_100m) {
        cells[i].best_rotation = true;
    }
    Ok(AblationTable { cells })
}
