//! LiDAR preprocessing: extrinsic alignment into the radar frame, ground
//! removal, the radar vertical field-of-view gate and label consolidation.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat3;
use crate::scalar::Real;
use crate::types::{LabeledCloud, Point3, SemanticClass};

/// Rigid LiDAR-to-radar transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsic<T> {
    rotation: Mat3<T>,
    translation: [T; 3],
}

impl<T: Real> Extrinsic<T> {
    pub fn new(rotation: [[T; 3]; 3], translation: [T; 3]) -> Result<Self> {
        let r = Mat3(rotation);
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
        let rrt = r * r.transpose();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { T::one() } else { T::zero() };
                if (rrt[(i, j)] - e).abs() > tol {
                    return Err(Error::Invalid("extrinsic rotation is not orthonormal".into()));
                }
            }
        }
        if (r.determinant() - T::one()).abs() > tol {
            return Err(Error::Invalid("extrinsic rotation must have determinant +1".into()));
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("extrinsic translation is not finite".into()));
        }
        Ok(Self {
            rotation: r,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: [T::zero(); 3],
        }
    }

    /// Rotation `Rz(yaw)·Ry(pitch)·Rx(roll)` followed by translation.
    pub fn from_rpy(roll: T, pitch: T, yaw: T, translation: [T; 3]) -> Self {
        let (sr, cr) = roll.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let (sy, cy) = yaw.sin_cos();
        let rotation = Mat3([
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]);
        Self {
            rotation,
            translation,
        }
    }

    pub fn transform(&self, p: &Point3<T>) -> Point3<T> {
        let q = self.rotation.mul_vec(p.xyz());
        Point3 {
            x: q[0] + self.translation[0],
            y: q[1] + self.translation[1],
            z: q[2] + self.translation[2],
            intensity: p.intensity,
        }
    }
}

/// JSON form of an extrinsic: either a full rotation matrix or roll/pitch/yaw
/// in degrees, plus a translation in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrinsicFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rpy_deg: Option<[f64; 3]>,
    pub translation: [f64; 3],
}

impl ExtrinsicFile {
    pub fn to_extrinsic<T: Real>(&self) -> Result<Extrinsic<T>> {
        let t = self.translation.map(T::lit);
        match (&self.rotation, &self.rpy_deg) {
            (Some(_), Some(_)) => Err(Error::Invalid(
                "extrinsic gives both rotation and rpy_deg".into(),
            )),
            (Some(r), None) => Extrinsic::new(r.map(|row| row.map(T::lit)), t),
            (None, rpy) => {
                let [r, p, y] = rpy.unwrap_or([0.0; 3]).map(|d| T::lit(d.to_radians()));
                Ok(Extrinsic::from_rpy(r, p, y, t))
            }
        }
    }
}

pub fn align_to_radar<T: Real>(cloud: &LabeledCloud<T>, e: &Extrinsic<T>) -> LabeledCloud<T> {
    cloud.map_points(|p| e.transform(p))
}

/// Vertical field-of-view and range gate of the radar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovSpec<T> {
    /// Half of the vertical opening angle, radians.
    pub half_angle: T,
    pub min_range: T,
    pub max_range: T,
}

impl<T: Real> FovSpec<T> {
    pub fn new(half_angle: T, min_range: T, max_range: T) -> Result<Self> {
        if !(half_angle > T::zero() && half_angle < T::FRAC_PI_2()) {
            return Err(Error::Invalid("fov half angle must lie in (0, pi/2)".into()));
        }
        if !(min_range >= T::zero() && min_range < max_range) {
            return Err(Error::Invalid("fov needs 0 <= min_range < max_range".into()));
        }
        Ok(Self {
            half_angle,
            min_range,
            max_range,
        })
    }

    /// Symmetric elevation gate plus Euclidean range gate about the origin.
    pub fn admits(&self, p: &Point3<T>) -> bool {
        let planar = p.x.hypot(p.y);
        let elevation = p.z.atan2(planar);
        let range = (planar * planar + p.z * p.z).sqrt();
        elevation.abs() <= self.half_angle && range >= self.min_range && range <= self.max_range
    }
}

/// Keeps the points the radar could have seen. Expects a cloud already in the
/// radar frame.
pub fn fov_filter<T: Real>(cloud: &LabeledCloud<T>, spec: &FovSpec<T>) -> LabeledCloud<T> {
    cloud.retain_by(|_, p, _| spec.admits(p))
}

/// Grid ground remover: per `cell_size` square the 5th-percentile height is
/// taken as the ground level and every point no higher than
/// `ground + height_margin` is dropped.
pub fn remove_ground<T: Real>(
    cloud: &LabeledCloud<T>,
    cell_size: T,
    height_margin: T,
) -> Result<LabeledCloud<T>> {
    if !(cell_size > T::zero()) {
        return Err(Error::contract("ground cell size must be positive"));
    }
    let key = |p: &Point3<T>| {
        (
            (p.x / cell_size).floor().to_i64().unwrap_or(i64::MAX),
            (p.y / cell_size).floor().to_i64().unwrap_or(i64::MAX),
        )
    };
    let mut heights: HashMap<(i64, i64), Vec<T>> = HashMap::new();
    for p in cloud.points() {
        heights.entry(key(p)).or_default().push(p.z);
    }
    let ground: HashMap<(i64, i64), T> = heights
        .into_iter()
        .map(|(k, mut zs)| {
            zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let idx = (0.05 * (zs.len() - 1) as f64).floor() as usize;
            (k, zs[idx])
        })
        .collect();
    Ok(cloud.retain_by(|_, p, _| p.z > ground[&key(p)] + height_margin))
}

/// Fine-grained taxonomy of the upstream LiDAR segmenter assumed by
/// [`LabelMap16to4::reference`]. Index = source id.
pub const SOURCE_CLASSES: [&str; 16] = [
    "unlabeled",
    "car",
    "bicycle",
    "motorcycle",
    "truck",
    "other-vehicle",
    "pedestrian",
    "road",
    "sidewalk",
    "building",
    "fence",
    "vegetation",
    "trunk",
    "terrain",
    "pole",
    "traffic-sign",
];

const PEDESTRIAN_ID: usize = 6;

/// Total map from the 16 source ids to the four consolidated classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap16to4 {
    table: [SemanticClass; 16],
}

impl LabelMap16to4 {
    pub fn new(table: [SemanticClass; 16]) -> Result<Self> {
        if table[PEDESTRIAN_ID] != SemanticClass::Noise {
            return Err(Error::Invalid("pedestrian must map to noise".into()));
        }
        Ok(Self { table })
    }

    /// Vehicles of every kind, buildings and fences, vegetation and trunks;
    /// everything else (people, ground, poles, signs) is noise.
    pub fn reference() -> Self {
        use SemanticClass::*;
        Self {
            table: [
                Noise, Vehicle, Vehicle, Vehicle, Vehicle, Vehicle, Noise, Noise, Noise, Building,
                Building, Vegetation, Vegetation, Noise, Noise, Noise,
            ],
        }
    }

    pub fn get(&self, source_id: u8) -> Option<SemanticClass> {
        self.table.get(source_id as usize).copied()
    }

    /// Parses `{"<id or name>": "Vehicle" | ...}`. Every one of the 16 ids must
    /// be present.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Invalid("label map must be a JSON object".into()))?;
        let mut table: [Option<SemanticClass>; 16] = [None; 16];
        for (key, v) in obj {
            let id = match key.parse::<usize>() {
                Ok(id) => id,
                Err(_) => SOURCE_CLASSES
                    .iter()
                    .position(|n| n.eq_ignore_ascii_case(key))
                    .ok_or_else(|| Error::Invalid(format!("unknown source label {key:?}")))?,
            };
            if id >= 16 {
                return Err(Error::UnmappedLabel(id as u16));
            }
            let name = v
                .as_str()
                .ok_or_else(|| Error::Invalid(format!("label map value for {key:?} must be a string")))?;
            let class = SemanticClass::parse(name)
                .ok_or_else(|| Error::Invalid(format!("unknown class {name:?} for {key:?}")))?;
            table[id] = Some(class);
        }
        if let Some(missing) = table.iter().position(Option::is_none) {
            return Err(Error::UnmappedLabel(missing as u16));
        }
        Self::new(table.map(Option::unwrap))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map: BTreeMap<String, String> = self
            .table
            .iter()
            .enumerate()
            .map(|(i, c)| (i.to_string(), capitalized(*c)))
            .collect();
        serde_json::to_value(map).expect("string map serializes")
    }
}

fn capitalized(c: SemanticClass) -> String {
    let n = c.name();
    n[..1].to_ascii_uppercase() + &n[1..]
}

/// Replaces raw source ids by their consolidated class.
pub fn consolidate_labels<T: Real>(
    points: Vec<Point3<T>>,
    source_ids: &[u8],
    map: &LabelMap16to4,
) -> Result<LabeledCloud<T>> {
    let labels = source_ids
        .iter()
        .map(|&id| map.get(id).ok_or(Error::UnmappedLabel(id as u16)))
        .collect::<Result<Vec<_>>>()?;
    LabeledCloud::new(points, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cloud(pts: &[[f64; 3]]) -> LabeledCloud<f64> {
        LabeledCloud::new(
            pts.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect(),
            vec![SemanticClass::Building; pts.len()],
        )
        .unwrap()
    }

    #[test]
    fn align_examples() {
        let c = cloud(&[[1.0, 2.0, 0.5]]);
        assert_eq!(align_to_radar(&c, &Extrinsic::identity()), c);
        let shift = Extrinsic::new(Mat3::identity().0, [0.0, 0.0, -0.5]).unwrap();
        assert_eq!(align_to_radar(&c, &shift).points()[0].z, 0.0);
        let yaw = ExtrinsicFile {
            rotation: None,
            rpy_deg: Some([0.0, 0.0, 90.0]),
            translation: [0.0; 3],
        }
        .to_extrinsic::<f64>()
        .unwrap();
        let q = align_to_radar(&cloud(&[[1.0, 0.0, 0.0]]), &yaw).points()[0];
        assert!(q.x.abs() < 1e-15 && (q.y - 1.0).abs() < 1e-15 && q.z.abs() < 1e-15);
    }

    #[test]
    fn extrinsic_rejects_bad_rotation() {
        let scaled = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(Extrinsic::<f64>::new(scaled, [0.0; 3]).is_err());
        let reflection = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(Extrinsic::<f64>::new(reflection, [0.0; 3]).is_err());
    }

    #[test]
    fn fov_examples() {
        let spec = FovSpec::new(5f64.to_radians(), 0.0, 100.0).unwrap();
        assert_eq!(fov_filter(&cloud(&[[10.0, 0.0, 0.0]]), &spec).len(), 1);
        // atan2(2, 10) = 11.31 deg > 5 deg
        assert!((2f64.atan2(10.0).to_degrees() - 11.3099).abs() < 1e-4);
        assert!(fov_filter(&cloud(&[[10.0, 0.0, 2.0]]), &spec).is_empty());
        let short = FovSpec::new(0.5f64, 0.0, 5.0).unwrap();
        assert!(fov_filter(&cloud(&[[10.0, 0.0, 0.0]]), &short).is_empty());
        assert!(FovSpec::new(0.0f64, 0.0, 1.0).is_err());
        assert!(FovSpec::new(0.1f64, 2.0, 1.0).is_err());
    }

    #[test]
    fn flat_ground_is_removed() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push([i as f64 * 0.25, j as f64 * 0.25, 0.0]);
            }
        }
        assert!(remove_ground(&cloud(&pts), 1.0, 0.3).unwrap().is_empty());
        pts.push([2.1, 2.1, 2.0]);
        let kept = remove_ground(&cloud(&pts), 1.0, 0.3).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.points()[0].z, 2.0);
        assert!(remove_ground(&LabeledCloud::<f64>::empty(), 1.0, 0.3).unwrap().is_empty());
        assert!(remove_ground(&cloud(&pts), 0.0, 0.3).is_err());
    }

    #[test]
    fn two_tier_scene_separates_wall_from_ground() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut pts = Vec::new();
        let mut is_wall = Vec::new();
        for _ in 0..20_000 {
            let x = rng.random_range(-10.0..10.0);
            let y = rng.random_range(-10.0..10.0);
            pts.push([x, y, noise.sample(&mut rng)]);
            is_wall.push(false);
        }
        for _ in 0..3_000 {
            let x = rng.random_range(-10.0..10.0);
            let z = rng.random_range(0.5..3.0);
            pts.push([x, 4.0 + noise.sample(&mut rng), z]);
            is_wall.push(true);
        }
        let c = cloud(&pts);
        // tag points through intensity so survivors can be traced back
        let tagged = LabeledCloud::new(
            c.points().iter().enumerate().map(|(i, p)| p.with_intensity(i as f64)).collect(),
            c.labels().to_vec(),
        )
        .unwrap();
        let kept = remove_ground(&tagged, 1.0, 0.3).unwrap();
        let kept_wall = kept.points().iter().filter(|p| is_wall[p.intensity as usize]).count();
        let kept_ground = kept.len() - kept_wall;
        assert!(kept_wall as f64 >= 0.99 * 3000.0, "wall kept {kept_wall}");
        assert!(kept_ground as f64 <= 0.01 * 20000.0, "ground kept {kept_ground}");
    }

    #[test]
    fn label_consolidation() {
        let map = LabelMap16to4::reference();
        let car = SOURCE_CLASSES.iter().position(|&n| n == "car").unwrap() as u8;
        let ped = SOURCE_CLASSES.iter().position(|&n| n == "pedestrian").unwrap() as u8;
        let pts = vec![Point3::new(0.0f64, 0.0, 0.0); 2];
        let c = consolidate_labels(pts, &[car, ped], &map).unwrap();
        assert_eq!(c.labels(), &[SemanticClass::Vehicle, SemanticClass::Noise]);
        assert!(consolidate_labels::<f64>(vec![], &[], &map).unwrap().is_empty());
        let err = consolidate_labels(vec![Point3::new(0.0f64, 0.0, 0.0)], &[17], &map).unwrap_err();
        assert!(err.to_string().contains("17"));
    }

    #[test]
    fn label_map_json() {
        let map = LabelMap16to4::reference();
        let back = LabelMap16to4::from_json(&map.to_json()).unwrap();
        assert_eq!(back, map);

        let mut named = serde_json::Map::new();
        for (i, n) in SOURCE_CLASSES.iter().enumerate() {
            named.insert(n.to_string(), serde_json::json!(capitalized(map.get(i as u8).unwrap())));
        }
        assert_eq!(LabelMap16to4::from_json(&named.clone().into()).unwrap(), map);

        named.remove("trunk");
        let err = LabelMap16to4::from_json(&named.clone().into()).unwrap_err();
        assert!(err.to_string().contains("12"), "{err}");

        named.insert("trunk".into(), serde_json::json!("Vegetation"));
        named.insert("pedestrian".into(), serde_json::json!("Vehicle"));
        assert!(LabelMap16to4::from_json(&named.into()).is_err());
    }

    proptest! {
        #[test]
        fn fov_filter_is_idempotent_and_pointwise(
            pts in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, -5.0..5.0f64), 0..200),
            half_deg in 0.5..30.0f64, min_r in 0.0..5.0f64, span in 1.0..60.0f64,
        ) {
            let c = LabeledCloud::new(
                pts.iter().enumerate().map(|(i, p)| Point3::new(p.0, p.1, p.2).with_intensity(i as f64)).collect(),
                vec![SemanticClass::Noise; pts.len()],
            ).unwrap();
            let spec = FovSpec::new(half_deg.to_radians(), min_r, min_r + span).unwrap();
            let once = fov_filter(&c, &spec);
            prop_assert_eq!(&fov_filter(&once, &spec), &once);
            let expected: Vec<f64> = pts.iter().enumerate().filter(|(_, p)| {
                let planar = (p.0 * p.0 + p.1 * p.1).sqrt();
                let r = (planar * planar + p.2 * p.2).sqrt();
                p.2.atan2(planar).abs() <= spec.half_angle && r >= min_r && r <= min_r + span
            }).map(|(i, _)| i as f64).collect();
            let got: Vec<f64> = once.points().iter().map(|p| p.intensity).collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn ground_removal_keeps_elevated_points(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts = Vec::new();
            for _ in 0..400 {
                pts.push([rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(-0.05..0.05)]);
            }
            for _ in 0..30 {
                pts.push([rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(0.4..3.0)]);
            }
            let c = cloud(&pts);
            let kept = remove_ground(&c, 1.0, 0.3).unwrap();
            // ground estimate <= 0.05 in every cell, so everything above 0.35 survives
            let expected = pts.iter().filter(|p| p[2] > 0.35).count();
            let got = kept.points().iter().filter(|p| p.z > 0.35).count();
            prop_assert_eq!(got, expected);
        }
    }
}
