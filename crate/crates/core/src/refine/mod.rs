//! Label refinement of LiDAR clouds.
//!
//! Pass 1 clusters vegetation-labeled points, encloses every sufficiently
//! large cluster in an axis-aligned box and relabels building/noise points
//! inside it as vegetation. Pass 2 looks at the neighborhood of every
//! remaining vegetation point and, when the neighborhood is linear or planar,
//! relabels its vegetation members as building.

mod dbscan;
mod spatial;
mod structure;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::{LabeledCloud, Point3, SemanticClass};

pub use dbscan::{dbscan, Clustering};
pub use spatial::HashGrid;
pub use structure::{assess_structure, svd_singular_values, StructureKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineParams<T> {
    pub dbscan_eps: T,
    pub dbscan_min_pts: usize,
    /// Smallest cluster that gets a bounding box.
    pub aabb_min_cluster: usize,
    /// Neighborhood radius for the structure test, meters.
    pub svd_radius: T,
    /// A neighborhood must hold strictly more points than this.
    pub svd_min_points: usize,
    pub line_ratio: T,
    pub plane_ratio: T,
}

impl<T: Real> Default for RefineParams<T> {
    fn default() -> Self {
        Self {
            dbscan_eps: T::lit(0.8),
            dbscan_min_pts: 8,
            aabb_min_cluster: 30,
            svd_radius: T::lit(1.0),
            svd_min_points: 10,
            line_ratio: T::lit(0.15),
            plane_ratio: T::lit(0.15),
        }
    }
}

impl<T: Real> RefineParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = self.dbscan_eps > T::zero()
            && self.svd_radius > T::zero()
            && self.dbscan_min_pts > 0
            && self.aabb_min_cluster > 0
            && self.svd_min_points > 0;
        let ratios = |r: T| r > T::zero() && r < T::one();
        if !positive || !ratios(self.line_ratio) || !ratios(self.plane_ratio) {
            return Err(Error::Invalid(
                "refine parameters must be positive with ratios in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb<T> {
    pub min: [T; 3],
    pub max: [T; 3],
}

impl<T: Real> Aabb<T> {
    /// Closed-box membership.
    pub fn contains(&self, p: &Point3<T>) -> bool {
        let q = p.xyz();
        (0..3).all(|k| q[k] >= self.min[k] && q[k] <= self.max[k])
    }
}

pub fn compute_aabb<T: Real>(points: &[Point3<T>]) -> Result<Aabb<T>> {
    let first = points
        .first()
        .ok_or_else(|| Error::contract("bounding box of an empty cluster"))?
        .xyz();
    let mut b = Aabb {
        min: first,
        max: first,
    };
    for p in &points[1..] {
        let q = p.xyz();
        for k in 0..3 {
            b.min[k] = b.min[k].min(q[k]);
            b.max[k] = b.max[k].max(q[k]);
        }
    }
    Ok(b)
}

/// Relabels building and noise points inside the closed box as vegetation.
/// Vehicle labels are left alone.
pub fn refine_vegetation_points<T: Real>(cloud: &LabeledCloud<T>, aabb: &Aabb<T>) -> LabeledCloud<T> {
    let labels = vegetation_relabels(cloud.points(), cloud.labels(), aabb)
        .fold(cloud.labels().to_vec(), |mut acc, i| {
            acc[i] = SemanticClass::Vegetation;
            acc
        });
    cloud.with_labels(labels).expect("same length")
}

fn vegetation_relabels<'a, T: Real>(
    points: &'a [Point3<T>],
    labels: &'a [SemanticClass],
    aabb: &'a Aabb<T>,
) -> impl Iterator<Item = usize> + 'a {
    points
        .iter()
        .zip(labels)
        .enumerate()
        .filter(move |(_, (p, l))| {
            matches!(l, SemanticClass::Building | SemanticClass::Noise) && aabb.contains(p)
        })
        .map(|(i, _)| i)
}

/// Points within distance `r` of `center` regardless of label: returns the
/// member indices (ascending) and their count.
pub fn search_near_points<T: Real>(
    cloud: &LabeledCloud<T>,
    center: &Point3<T>,
    r: T,
) -> Result<(Vec<usize>, usize)> {
    if !(r > T::zero()) {
        return Err(Error::contract("search radius must be positive"));
    }
    let xyz: Vec<[T; 3]> = cloud.points().iter().map(Point3::xyz).collect();
    let grid = HashGrid::new(&xyz, r);
    let found = grid.within(&center.xyz(), r);
    let n = found.len();
    Ok((found, n))
}

/// Relabel counts of a refinement run, keyed `"from->to"`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub vegetation_clusters: usize,
    pub boxes: usize,
    pub pass1: BTreeMap<String, usize>,
    pub pass2: BTreeMap<String, usize>,
}

impl RefineReport {
    pub fn pass1_total(&self) -> usize {
        self.pass1.values().sum()
    }

    pub fn pass2_total(&self) -> usize {
        self.pass2.values().sum()
    }
}

fn transition(from: SemanticClass, to: SemanticClass) -> String {
    format!("{from}->{to}")
}

pub fn refine_labels<T: Real>(
    cloud: &LabeledCloud<T>,
    params: &RefineParams<T>,
) -> Result<(LabeledCloud<T>, RefineReport)> {
    params.validate()?;
    let mut report = RefineReport::default();
    let points = cloud.points();
    let mut labels = cloud.labels().to_vec();
    let xyz: Vec<[T; 3]> = points.iter().map(Point3::xyz).collect();

    // pass 1: enclose vegetation clusters
    let veg: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == SemanticClass::Vegetation)
        .collect();
    let veg_xyz: Vec<[T; 3]> = veg.iter().map(|&i| xyz[i]).collect();
    let clusters = dbscan(&veg_xyz, params.dbscan_eps, params.dbscan_min_pts)?;
    report.vegetation_clusters = clusters.clusters.len();
    for members in &clusters.clusters {
        if members.len() < params.aabb_min_cluster {
            continue;
        }
        let member_points: Vec<Point3<T>> = members.iter().map(|&m| points[veg[m]]).collect();
        let aabb = compute_aabb(&member_points)?;
        report.boxes += 1;
        let hits: Vec<usize> = vegetation_relabels(points, &labels, &aabb).collect();
        for i in hits {
            *report
                .pass1
                .entry(transition(labels[i], SemanticClass::Vegetation))
                .or_default() += 1;
            labels[i] = SemanticClass::Vegetation;
        }
    }

    // pass 2: structure test around every vegetation point; targets are
    // gathered against the post-pass-1 labels and written in one batch
    let radius = params.svd_radius;
    let grid = HashGrid::new(&xyz, params.dbscan_eps.max(radius));
    let veg: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == SemanticClass::Vegetation)
        .collect();
    let targets: Vec<Vec<usize>> = veg
        .par_iter()
        .map(|&j| {
            let hood = grid.within(&xyz[j], radius);
            if hood.len() <= params.svd_min_points || hood.len() < 3 {
                return Vec::new();
            }
            let coords: Vec<[T; 3]> = hood.iter().map(|&i| xyz[i]).collect();
            let s = match svd_singular_values(&coords) {
                Ok(s) => s,
                Err(_) => return Vec::new(),
            };
            match assess_structure(s[0], s[1], s[2], params.line_ratio, params.plane_ratio) {
                Ok(StructureKind::Line | StructureKind::Plane) => hood
                    .into_iter()
                    .filter(|&i| labels[i] == SemanticClass::Vegetation)
                    .collect(),
                _ => Vec::new(),
            }
        })
        .collect();
    let mut to_building = vec![false; labels.len()];
    targets.into_iter().flatten().for_each(|i| to_building[i] = true);
    let flipped = to_building.iter().filter(|&&b| b).count();
    if flipped > 0 {
        report.pass2.insert(
            transition(SemanticClass::Vegetation, SemanticClass::Building),
            flipped,
        );
    }
    for (l, b) in labels.iter_mut().zip(&to_building) {
        if *b {
            *l = SemanticClass::Building;
        }
    }

    Ok((cloud.with_labels(labels)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn pt(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }

    #[test]
    fn aabb_examples() {
        let p = pt(1.0, -2.0, 3.0);
        let b = compute_aabb(&[p]).unwrap();
        assert_eq!((b.min, b.max), ([1.0, -2.0, 3.0], [1.0, -2.0, 3.0]));
        let b = compute_aabb(&[pt(0.0, 0.0, 0.0), pt(1.0, 2.0, 3.0)]).unwrap();
        assert_eq!((b.min, b.max), ([0.0; 3], [1.0, 2.0, 3.0]));
        // componentwise extrema of (-1,0,0), (1,0,0), (0,-1,5)
        let b = compute_aabb(&[pt(-1.0, 0.0, 0.0), pt(1.0, 0.0, 0.0), pt(0.0, -1.0, 5.0)]).unwrap();
        assert_eq!((b.min, b.max), ([-1.0, -1.0, 0.0], [1.0, 0.0, 5.0]));
        assert!(compute_aabb::<f64>(&[]).is_err());
    }

    #[test]
    fn box_relabeling_rules() {
        use SemanticClass::*;
        let cloud = LabeledCloud::new(
            vec![pt(0.5, 0.5, 0.5), pt(2.0, 0.5, 0.5), pt(0.2, 0.2, 0.2), pt(1.0, 1.0, 1.0)],
            vec![Building, Building, Vehicle, Noise],
        )
        .unwrap();
        let b = Aabb {
            min: [0.0; 3],
            max: [1.0; 3],
        };
        let out = refine_vegetation_points(&cloud, &b);
        assert_eq!(out.labels(), &[Vegetation, Building, Vehicle, Vegetation]);
        assert_eq!(out.points(), cloud.points());
    }

    #[test]
    fn neighborhood_search_examples() {
        let cloud = LabeledCloud::new(
            vec![pt(0.0, 0.0, 0.0), pt(0.5, 0.0, 0.0), pt(0.0, 1.0, 0.0), pt(0.0, 0.0, 2.0)],
            vec![SemanticClass::Noise; 4],
        )
        .unwrap();
        let (set, n) = search_near_points(&cloud, &cloud.points()[0], 0.1).unwrap();
        assert_eq!((set, n), (vec![0], 1));
        let (set, n) = search_near_points(&cloud, &cloud.points()[0], 1.0).unwrap();
        assert_eq!((set, n), (vec![0, 1, 2], 3));
        assert!(search_near_points(&cloud, &cloud.points()[0], 0.0).is_err());
    }

    #[test]
    fn no_vegetation_means_no_change() {
        let cloud = LabeledCloud::new(
            (0..50).map(|i| pt(i as f64 * 0.1, 0.0, 0.0)).collect(),
            vec![SemanticClass::Building; 50],
        )
        .unwrap();
        let (out, report) = refine_labels(&cloud, &RefineParams::default()).unwrap();
        assert_eq!(out, cloud);
        assert_eq!(report.pass1_total() + report.pass2_total(), 0);
    }

    #[test]
    fn mislabeled_wall_becomes_building() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let pts: Vec<_> = (0..500)
            .map(|_| pt(rng.random_range(0.0..10.0), 5.0 + noise.sample(&mut rng), rng.random_range(0.0..3.0)))
            .collect();
        let cloud = LabeledCloud::new(pts, vec![SemanticClass::Vegetation; 500]).unwrap();
        let (out, _) = refine_labels(&cloud, &RefineParams::default()).unwrap();
        assert_eq!(out.count(SemanticClass::Building), 500);
    }

    #[test]
    fn contaminated_tree_becomes_vegetation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = Normal::new(0.0, 0.7).unwrap();
        let pts: Vec<_> = (0..300)
            .map(|_| pt(20.0 + n.sample(&mut rng), 20.0 + n.sample(&mut rng), 3.0 + n.sample(&mut rng)))
            .collect();
        let mut labels = vec![SemanticClass::Vegetation; 300];
        // contaminate points near the crown center so they sit inside the box
        let mut order: Vec<usize> = (0..300).collect();
        order.sort_by(|&a, &b| {
            let d = |i: usize| pts[i].dist2(&pt(20.0, 20.0, 3.0));
            d(a).partial_cmp(&d(b)).unwrap()
        });
        for &i in order.iter().take(60).step_by(2) {
            labels[i] = SemanticClass::Building;
        }
        let cloud = LabeledCloud::new(pts, labels).unwrap();
        let (out, report) = refine_labels(&cloud, &RefineParams::default()).unwrap();
        assert_eq!(out.count(SemanticClass::Vegetation), 300);
        assert_eq!(report.pass1.get("building->vegetation"), Some(&30));
    }

    #[test]
    fn vehicles_are_never_touched() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cloud = LabeledCloud::empty();
        for _ in 0..400 {
            let class = match rng.random_range(0..4) {
                0 => SemanticClass::Vehicle,
                1 => SemanticClass::Vegetation,
                2 => SemanticClass::Building,
                _ => SemanticClass::Noise,
            };
            cloud.push(pt(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0), rng.random_range(0.0..2.0)), class);
        }
        let (out, _) = refine_labels(&cloud, &RefineParams::default()).unwrap();
        assert_eq!(out.points(), cloud.points());
        for (a, b) in cloud.labels().iter().zip(out.labels()) {
            assert_eq!(*a == SemanticClass::Vehicle, *b == SemanticClass::Vehicle);
        }
    }
}
