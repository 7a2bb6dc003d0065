//! Radar-side point extraction and semantic masking.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::scalar::Real;
use crate::types::{ClassRaster, GridSpec, PolarScan, SemanticClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint<T> {
    pub azimuth_bin: usize,
    pub range_bin: usize,
    pub power: T,
    /// Planar position of the cell center in the sensor frame.
    pub x: T,
    pub y: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<SemanticClass>,
}

/// Points extracted from one scan, ordered by azimuth row then range bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarPointSet<T> {
    pub grid: GridSpec<T>,
    pub timestamp: f64,
    pub points: Vec<RadarPoint<T>>,
}

impl<T: Real> RadarPointSet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xy(&self) -> Vec<[T; 2]> {
        self.points.iter().map(|p| [p.x, p.y]).collect()
    }

    fn keep(&self, f: impl Fn(&RadarPoint<T>) -> bool) -> Self {
        Self {
            grid: self.grid,
            timestamp: self.timestamp,
            points: self.points.iter().copied().filter(|p| f(p)).collect(),
        }
    }
}

/// Which semantic classes of radar returns survive masking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    NoneRemoved,
    VehicleRemoved,
    OnlyBuilding,
}

impl MaskMode {
    pub const ALL: [MaskMode; 3] = [MaskMode::NoneRemoved, MaskMode::VehicleRemoved, MaskMode::OnlyBuilding];

    pub fn label(self) -> &'static str {
        match self {
            MaskMode::NoneRemoved => "None removed",
            MaskMode::VehicleRemoved => "Vehicle removed",
            MaskMode::OnlyBuilding => "Only building",
        }
    }
}

impl FromStr for MaskMode {
    type Err = Error;

    /// Accepts `none`, `vehicle`, `building` and their long forms.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "none-removed" => Ok(MaskMode::NoneRemoved),
            "vehicle" | "vehicle-removed" => Ok(MaskMode::VehicleRemoved),
            "building" | "only-building" => Ok(MaskMode::OnlyBuilding),
            other => Err(Error::Invalid(format!("unknown mask mode {other:?}"))),
        }
    }
}

/// Per azimuth row, the `k` highest-power bins strictly above `min_power`;
/// ties go to the nearer range bin.
pub fn k_strongest<T: Real>(scan: &PolarScan<T>, k: usize, min_power: T) -> Result<RadarPointSet<T>> {
    if k == 0 {
        return Err(Error::contract("k must be at least 1"));
    }
    let grid = scan.grid;
    let mut points = Vec::new();
    let mut row_sel: Vec<(T, usize)> = Vec::with_capacity(grid.range_bins);
    for a in 0..grid.azimuth_bins {
        row_sel.clear();
        row_sel.extend(
            scan.row(a)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > min_power)
                .map(|(r, &p)| (p, r)),
        );
        let cmp = |x: &(T, usize), y: &(T, usize)| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1));
        if row_sel.len() > k {
            row_sel.select_nth_unstable_by(k - 1, cmp);
            row_sel.truncate(k);
        }
        row_sel.sort_by_key(|&(_, r)| r);
        let (s, c) = grid.azimuth_center(a).sin_cos();
        for &(power, r) in &row_sel {
            let rho = grid.range_center(r);
            points.push(RadarPoint {
                azimuth_bin: a,
                range_bin: r,
                power,
                x: rho * c,
                y: rho * s,
                class: None,
            });
        }
    }
    Ok(RadarPointSet {
        grid,
        timestamp: scan.timestamp,
        points,
    })
}

/// Drops or keeps points by the class raster cell they fall in, looking
/// `dilation` cells around it.
pub fn apply_semantic_mask<T: Real>(
    points: &RadarPointSet<T>,
    raster: &ClassRaster<T>,
    mode: MaskMode,
    dilation: usize,
) -> Result<RadarPointSet<T>> {
    if !points.grid.same_shape(&raster.grid) {
        return Err(Error::contract(format!(
            "raster grid {} does not match scan grid {}",
            raster.grid.describe(),
            points.grid.describe()
        )));
    }
    let out = match mode {
        MaskMode::NoneRemoved => points.clone(),
        MaskMode::VehicleRemoved => {
            points.keep(|p| !raster.vehicle.any_within(p.azimuth_bin, p.range_bin, dilation))
        }
        MaskMode::OnlyBuilding => {
            let mut kept = points.keep(|p| raster.building.any_within(p.azimuth_bin, p.range_bin, dilation));
            kept.points.iter_mut().for_each(|p| p.class = Some(SemanticClass::Building));
            kept
        }
    };
    Ok(out)
}

/// Mean squared difference of two equally sized power images.
pub fn mse<T: Real>(a: &PolarScan<T>, b: &PolarScan<T>) -> Result<T> {
    if a.grid.azimuth_bins != b.grid.azimuth_bins || a.grid.range_bins != b.grid.range_bins {
        return Err(Error::contract(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.grid.azimuth_bins, a.grid.range_bins, b.grid.azimuth_bins, b.grid.range_bins
        )));
    }
    let sum: T = a
        .power()
        .iter()
        .zip(b.power())
        .map(|(&p, &q)| (p - q) * (p - q))
        .sum();
    Ok(sum / T::from_count(a.grid.cells()))
}

pub fn write_rps<T: Real + Serialize>(path: &Path, set: &RadarPointSet<T>) -> Result<()> {
    write_json(path, set)
}

pub fn read_rps<T: Real + serde::de::DeserializeOwned>(path: &Path) -> Result<RadarPointSet<T>> {
    read_json(path)
}
