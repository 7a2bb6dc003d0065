//! Shared geometric and semantic value types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::se2::Pose2;

/// Four-way semantic class. `Noise` is the catch-all (pedestrians, ground,
/// poles and anything else that is not a stable radar target).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SemanticClass {
    Noise,
    Vehicle,
    Vegetation,
    Building,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 4] = [
        SemanticClass::Noise,
        SemanticClass::Vehicle,
        SemanticClass::Vegetation,
        SemanticClass::Building,
    ];

    /// Raster channel order.
    pub const PROJECTED: [SemanticClass; 3] = [
        SemanticClass::Building,
        SemanticClass::Vehicle,
        SemanticClass::Vegetation,
    ];

    pub fn id(self) -> u8 {
        match self {
            SemanticClass::Noise => 0,
            SemanticClass::Vehicle => 1,
            SemanticClass::Vegetation => 2,
            SemanticClass::Building => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Noise => "noise",
            SemanticClass::Vehicle => "vehicle",
            SemanticClass::Vegetation => "vegetation",
            SemanticClass::Building => "building",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "noise" => Some(SemanticClass::Noise),
            "vehicle" => Some(SemanticClass::Vehicle),
            "vegetation" => Some(SemanticClass::Vegetation),
            "building" => Some(SemanticClass::Building),
            _ => None,
        }
    }
}

impl std::fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub intensity: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self {
            x,
            y,
            z,
            intensity: T::zero(),
        }
    }

    pub fn with_intensity(mut self, intensity: T) -> Self {
        self.intensity = intensity;
        self
    }

    pub fn xyz(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn planar_range(&self) -> T {
        self.x.hypot(self.y)
    }

    pub fn dist2(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.intensity.is_finite()
    }
}

/// Points with a parallel list of semantic labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledCloud<T> {
    points: Vec<Point3<T>>,
    labels: Vec<SemanticClass>,
}

impl<T: Real> LabeledCloud<T> {
    pub fn new(points: Vec<Point3<T>>, labels: Vec<SemanticClass>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Invalid(format!(
                "cloud has {} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::Invalid(format!("point {i} is not finite")));
        }
        Ok(Self { points, labels })
    }

    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn labels(&self) -> &[SemanticClass] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point3<T>, SemanticClass)> + '_ {
        self.points.iter().zip(self.labels.iter().copied())
    }

    pub fn push(&mut self, p: Point3<T>, label: SemanticClass) {
        self.points.push(p);
        self.labels.push(label);
    }

    /// Keeps the points for which `keep` is true, preserving order.
    pub fn retain_by(&self, mut keep: impl FnMut(usize, &Point3<T>, SemanticClass) -> bool) -> Self {
        let mut out = Self::empty();
        for (i, (p, l)) in self.iter().enumerate() {
            if keep(i, p, l) {
                out.push(*p, l);
            }
        }
        out
    }

    /// Same geometry with a replaced label list.
    pub fn with_labels(&self, labels: Vec<SemanticClass>) -> Result<Self> {
        if labels.len() != self.points.len() {
            return Err(Error::contract("label list length differs from point count"));
        }
        Ok(Self {
            points: self.points.clone(),
            labels,
        })
    }

    pub fn map_points(&self, f: impl Fn(&Point3<T>) -> Point3<T>) -> Self {
        Self {
            points: self.points.iter().map(f).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn count(&self, class: SemanticClass) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    pub fn into_parts(self) -> (Vec<Point3<T>>, Vec<SemanticClass>) {
        (self.points, self.labels)
    }
}

/// Polar grid geometry shared by radar scans and class rasters.
///
/// Azimuth row `a` spans `[2πa/A, 2π(a+1)/A)` counter-clockwise from the
/// sensor's x axis; range column `r` spans `[r·res, (r+1)·res)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub azimuth_bins: usize,
    pub range_bins: usize,
    pub range_resolution: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(azimuth_bins: usize, range_bins: usize, range_resolution: T) -> Result<Self> {
        let g = Self {
            azimuth_bins,
            range_bins,
            range_resolution,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.azimuth_bins == 0 || self.range_bins == 0 {
            return Err(Error::Invalid("grid needs at least one azimuth and one range bin".into()));
        }
        if !(self.range_resolution > T::zero()) || !self.range_resolution.is_finite() {
            return Err(Error::Invalid("range resolution must be positive".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.azimuth_bins * self.range_bins
    }

    pub fn index(&self, azimuth: usize, range: usize) -> usize {
        azimuth * self.range_bins + range
    }

    pub fn azimuth_step(&self) -> T {
        T::TAU() / T::from_count(self.azimuth_bins)
    }

    pub fn max_range(&self) -> T {
        self.range_resolution * T::from_count(self.range_bins)
    }

    /// Bin of a planar point, `None` when beyond the last range bin.
    pub fn bin_of(&self, x: T, y: T) -> Option<(usize, usize)> {
        let range = x.hypot(y);
        let r = (range / self.range_resolution).floor();
        if !r.is_finite() || r < T::zero() || r >= T::from_count(self.range_bins) {
            return None;
        }
        let mut az = y.atan2(x);
        if az < T::zero() {
            az = az + T::TAU();
        }
        let mut a = (az / self.azimuth_step()).floor().to_usize().unwrap_or(0);
        if a >= self.azimuth_bins {
            a = 0;
        }
        Some((a, r.to_usize().unwrap_or(0)))
    }

    /// Azimuth angle at the center of row `a`.
    pub fn azimuth_center(&self, a: usize) -> T {
        (T::from_count(a) + T::lit(0.5)) * self.azimuth_step()
    }

    pub fn range_center(&self, r: usize) -> T {
        (T::from_count(r) + T::lit(0.5)) * self.range_resolution
    }

    /// Planar coordinates of a cell center.
    pub fn cell_center(&self, a: usize, r: usize) -> [T; 2] {
        let (s, c) = self.azimuth_center(a).sin_cos();
        let rho = self.range_center(r);
        [rho * c, rho * s]
    }

    pub fn same_shape<U: Real>(&self, other: &GridSpec<U>) -> bool {
        self.azimuth_bins == other.azimuth_bins
            && self.range_bins == other.range_bins
            && (self.range_resolution.as_f64() - other.range_resolution.as_f64()).abs()
                <= 1e-6 * self.range_resolution.as_f64().abs()
    }

    pub fn describe(&self) -> String {
        format!(
            "{}x{} @ {} m/bin",
            self.azimuth_bins, self.range_bins, self.range_resolution
        )
    }

    pub fn ensure_matches<U: Real>(&self, other: &GridSpec<U>) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.describe(),
                actual: other.describe(),
            })
        }
    }

    pub fn cast<U: Real>(&self) -> GridSpec<U> {
        GridSpec {
            azimuth_bins: self.azimuth_bins,
            range_bins: self.range_bins,
            range_resolution: U::lit(self.range_resolution.as_f64()),
        }
    }
}

/// Azimuth x range power image.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarScan<T> {
    pub grid: GridSpec<T>,
    power: Vec<T>,
    pub timestamp: f64,
}

impl<T: Real> PolarScan<T> {
    pub fn new(grid: GridSpec<T>, power: Vec<T>, timestamp: f64) -> Result<Self> {
        grid.validate()?;
        if power.len() != grid.cells() {
            return Err(Error::Invalid(format!(
                "scan has {} values, grid {} needs {}",
                power.len(),
                grid.describe(),
                grid.cells()
            )));
        }
        if let Some(i) = power.iter().position(|p| !p.is_finite() || *p < T::zero()) {
            return Err(Error::Invalid(format!("power value {i} is negative or not finite")));
        }
        Ok(Self {
            grid,
            power,
            timestamp,
        })
    }

    pub fn zeros(grid: GridSpec<T>, timestamp: f64) -> Self {
        Self {
            grid,
            power: vec![T::zero(); grid.cells()],
            timestamp,
        }
    }

    pub fn power(&self) -> &[T] {
        &self.power
    }

    pub fn row(&self, a: usize) -> &[T] {
        let n = self.grid.range_bins;
        &self.power[a * n..(a + 1) * n]
    }

    pub fn get(&self, a: usize, r: usize) -> T {
        self.power[self.grid.index(a, r)]
    }
}

/// Row-major binary occupancy over a polar grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub azimuth_bins: usize,
    pub range_bins: usize,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(azimuth_bins: usize, range_bins: usize) -> Self {
        Self {
            azimuth_bins,
            range_bins,
            cells: vec![false; azimuth_bins * range_bins],
        }
    }

    pub fn from_cells(azimuth_bins: usize, range_bins: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != azimuth_bins * range_bins {
            return Err(Error::Invalid("mask size does not match its grid".into()));
        }
        Ok(Self {
            azimuth_bins,
            range_bins,
            cells,
        })
    }

    pub fn filled(azimuth_bins: usize, range_bins: usize) -> Self {
        Self {
            azimuth_bins,
            range_bins,
            cells: vec![true; azimuth_bins * range_bins],
        }
    }

    pub fn get(&self, a: usize, r: usize) -> bool {
        self.cells[a * self.range_bins + r]
    }

    pub fn set(&mut self, a: usize, r: usize, v: bool) {
        self.cells[a * self.range_bins + r] = v;
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn same_shape(&self, other: &Mask) -> bool {
        self.azimuth_bins == other.azimuth_bins && self.range_bins == other.range_bins
    }

    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.range_bins;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(i, _)| (i / n, i % n))
    }

    /// True when any cell within `radius` cells (azimuth wraps) is set.
    pub fn any_within(&self, a: usize, r: usize, radius: usize) -> bool {
        if radius == 0 {
            return self.get(a, r);
        }
        let rad = radius as isize;
        let na = self.azimuth_bins as isize;
        for da in -rad..=rad {
            let aa = (a as isize + da).rem_euclid(na) as usize;
            let lo = r.saturating_sub(radius);
            let hi = (r + radius).min(self.range_bins - 1);
            if (lo..=hi).any(|rr| self.get(aa, rr)) {
                return true;
            }
        }
        false
    }

    pub fn or_assign(&mut self, other: &Mask) {
        for (a, b) in self.cells.iter_mut().zip(other.cells.iter()) {
            *a |= *b;
        }
    }
}

/// Per-class binary occupancy rasters (building, vehicle, vegetation) on a
/// polar grid. Channels are independent and may overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRaster<T> {
    pub grid: GridSpec<T>,
    pub timestamp: f64,
    pub building: Mask,
    pub vehicle: Mask,
    pub vegetation: Mask,
}

impl<T: Real> ClassRaster<T> {
    pub fn empty(grid: GridSpec<T>, timestamp: f64) -> Self {
        let m = Mask::new(grid.azimuth_bins, grid.range_bins);
        Self {
            grid,
            timestamp,
            building: m.clone(),
            vehicle: m.clone(),
            vegetation: m,
        }
    }

    /// Channel for a projected class; `None` for noise.
    pub fn channel(&self, class: SemanticClass) -> Option<&Mask> {
        match class {
            SemanticClass::Building => Some(&self.building),
            SemanticClass::Vehicle => Some(&self.vehicle),
            SemanticClass::Vegetation => Some(&self.vegetation),
            SemanticClass::Noise => None,
        }
    }

    pub fn channel_mut(&mut self, class: SemanticClass) -> Option<&mut Mask> {
        match class {
            SemanticClass::Building => Some(&mut self.building),
            SemanticClass::Vehicle => Some(&mut self.vehicle),
            SemanticClass::Vegetation => Some(&mut self.vegetation),
            SemanticClass::Noise => None,
        }
    }

    pub fn channels(&self) -> [&Mask; 3] {
        [&self.building, &self.vehicle, &self.vegetation]
    }
}

/// Timestamped pose sequence with strictly increasing stamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<T> {
    stamps: Vec<f64>,
    poses: Vec<Pose2<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new() -> Self {
        Self {
            stamps: Vec::new(),
            poses: Vec::new(),
        }
    }

    pub fn from_parts(stamps: Vec<f64>, poses: Vec<Pose2<T>>) -> Result<Self> {
        if stamps.len() != poses.len() {
            return Err(Error::Invalid("timestamp and pose counts differ".into()));
        }
        if stamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("trajectory timestamps must be strictly increasing".into()));
        }
        Ok(Self { stamps, poses })
    }

    pub fn push(&mut self, stamp: f64, pose: Pose2<T>) -> Result<()> {
        if let Some(&last) = self.stamps.last() {
            if !(stamp > last) {
                return Err(Error::Invalid(format!(
                    "timestamp {stamp} does not follow {last}"
                )));
            }
        }
        self.stamps.push(stamp);
        self.poses.push(pose);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn stamps(&self) -> &[f64] {
        &self.stamps
    }

    pub fn poses(&self) -> &[Pose2<T>] {
        &self.poses
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Pose2<T>)> + '_ {
        self.stamps.iter().copied().zip(self.poses.iter())
    }

    pub fn last(&self) -> Option<(f64, Pose2<T>)> {
        Some((*self.stamps.last()?, *self.poses.last()?))
    }

    /// Cumulative planar path length at each pose.
    pub fn path_distances(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = T::zero();
        for (i, p) in self.poses.iter().enumerate() {
            if i > 0 {
                let q = &self.poses[i - 1];
                acc = acc + (p.x - q.x).hypot(p.y - q.y);
            }
            out.push(acc);
        }
        out
    }

    /// Index of the pose whose stamp is nearest to `t`, if within `tol`.
    pub fn nearest(&self, t: f64, tol: f64) -> Option<usize> {
        let i = self.stamps.partition_point(|&s| s < t);
        let mut best: Option<(usize, f64)> = None;
        for j in [i.wrapping_sub(1), i] {
            if let Some(&s) = self.stamps.get(j) {
                let d = (s - t).abs();
                if d <= tol && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    pub fn map_poses(&self, f: impl Fn(&Pose2<T>) -> Pose2<T>) -> Self {
        Self {
            stamps: self.stamps.clone(),
            poses: self.poses.iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_ids_roundtrip() {
        for c in SemanticClass::ALL {
            assert_eq!(SemanticClass::from_id(c.id()), Some(c));
            assert_eq!(SemanticClass::parse(c.name()), Some(c));
        }
        assert_eq!(SemanticClass::from_id(4), None);
    }

    #[test]
    fn cloud_rejects_length_mismatch() {
        let r = LabeledCloud::new(vec![Point3::new(0.0f64, 0.0, 0.0)], vec![]);
        assert!(r.is_err());
        let r = LabeledCloud::new(vec![Point3::new(f64::NAN, 0.0, 0.0)], vec![SemanticClass::Noise]);
        assert!(r.is_err());
    }

    #[test]
    fn retain_preserves_order() {
        let pts: Vec<_> = (0..6).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let labels = vec![SemanticClass::Noise; 6];
        let c = LabeledCloud::new(pts, labels).unwrap();
        let kept = c.retain_by(|i, _, _| i % 2 == 1);
        let xs: Vec<f64> = kept.points().iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![1.0, 3.0, 5.0]);
    }

    #[test]
    fn grid_binning_is_half_open_and_wraps() {
        let g = GridSpec::new(4, 10, 1.0f64).unwrap();
        assert_eq!(g.bin_of(2.5, 0.0), Some((0, 2)));
        assert_eq!(g.bin_of(0.0, 3.0), Some((1, 3)));
        assert_eq!(g.bin_of(-3.0, 0.0), Some((2, 3)));
        assert_eq!(g.bin_of(0.0, -3.0), Some((3, 3)));
        assert_eq!(g.bin_of(10.0, 0.0), None);
        assert_eq!(g.bin_of(3.0, -1e-18), Some((0, 3)));
    }

    #[test]
    fn mask_dilation_wraps_in_azimuth() {
        let mut m = Mask::new(8, 5);
        m.set(0, 2, true);
        assert!(m.any_within(7, 3, 1));
        assert!(!m.any_within(6, 2, 1));
        assert!(!m.any_within(7, 2, 0));
        assert!(m.any_within(0, 4, 2));
    }

    #[test]
    fn trajectory_requires_increasing_stamps() {
        let p = Pose2::<f64>::identity();
        assert!(Trajectory::from_parts(vec![0.0, 0.0], vec![p, p]).is_err());
        let mut t = Trajectory::new();
        t.push(1.0, p).unwrap();
        assert!(t.push(0.5, p).is_err());
        t.push(2.0, p).unwrap();
        assert_eq!(t.nearest(1.96, 0.05), Some(1));
        assert_eq!(t.nearest(1.5, 0.05), None);
    }
}
