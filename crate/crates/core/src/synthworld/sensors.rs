use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::se2::Pose2;
use crate::synthworld::scene::{cast, SceneSpec, Surface};
use crate::types::{ClassRaster, GridSpec, LabeledCloud, Point3, PolarScan, SemanticClass, Trajectory};

/// Derives an independent stream seed from a scene seed and a frame key.
pub fn frame_seed(seed: u64, frame: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ frame.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarSensor {
    pub azimuth_steps: usize,
    pub elevations_deg: Vec<f64>,
    /// Mounting height above the ground plane.
    pub height: f64,
    pub min_range: f64,
    pub max_range: f64,
    pub range_noise: f64,
}

impl Default for LidarSensor {
    fn default() -> Self {
        Self {
            azimuth_steps: 720,
            elevations_deg: (0..16).map(|i| -15.0 + 2.0 * i as f64).collect(),
            height: 1.8,
            min_range: 1.0,
            max_range: 60.0,
            range_noise: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionSpec {
    pub building_to_vegetation_rate: f64,
    pub vegetation_to_building_rate: f64,
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if ok(self.building_to_vegetation_rate) && ok(self.vegetation_to_building_rate) {
            Ok(())
        } else {
            Err(Error::Invalid("corruption rates must lie in [0, 1]".into()))
        }
    }
}

/// Simulated LiDAR sweep: points in the sensor frame (z up, origin at the
/// sensor), labels after corruption and the true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarFrame<T> {
    pub cloud: LabeledCloud<T>,
    pub truth: Vec<SemanticClass>,
}

fn intensity(class: SemanticClass) -> f64 {
    match class {
        SemanticClass::Building => 0.8,
        SemanticClass::Vehicle => 0.9,
        SemanticClass::Vegetation => 0.3,
        SemanticClass::Noise => 0.2,
    }
}

pub fn simulate_lidar<T: Real>(
    scene: &SceneSpec,
    pose: &Pose2<f64>,
    time: f64,
    sensor: &LidarSensor,
    corruption: &CorruptionSpec,
    seed: u64,
) -> Result<LidarFrame<T>> {
    corruption.validate()?;
    if !scene.contains(pose.translation()) {
        return Err(Error::contract("sensor pose lies outside the scene extent"));
    }
    if sensor.azimuth_steps == 0 || !(sensor.height > 0.0) || !(sensor.max_range > sensor.min_range) {
        return Err(Error::Invalid("lidar needs azimuth steps, positive height and a valid range window".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sensor.range_noise.max(0.0)).map_err(|e| Error::Invalid(e.to_string()))?;
    let o = pose.translation();
    let h = sensor.height;
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for ai in 0..sensor.azimuth_steps {
        let az = std::f64::consts::TAU * ai as f64 / sensor.azimuth_steps as f64;
        let world = pose.theta + az;
        let d = [world.cos(), world.sin()];
        let horizontal = cast(scene, o, d, time, sensor.max_range);
        for &el_deg in &sensor.elevations_deg {
            let el = el_deg.to_radians();
            let (se, ce) = el.sin_cos();
            let slope = se / ce;
            let z_at = |dist: f64| h + dist * slope;
            let ground = (el < 0.0).then(|| h / -slope);
            let mut hit: Option<(f64, SemanticClass)> = None;
            for &(dist, surface) in &horizontal {
                if ground.is_some_and(|g| g < dist) {
                    break;
                }
                match surface {
                    Surface::Wall(i) => {
                        let z = z_at(dist);
                        if z >= 0.0 && z <= scene.buildings[i].height {
                            hit = Some((dist, SemanticClass::Building));
                        }
                    }
                    Surface::Vehicle(i) => {
                        let z = z_at(dist);
                        if z >= 0.0 && z <= scene.vehicles[i].height {
                            hit = Some((dist, SemanticClass::Vehicle));
                        }
                    }
                    Surface::Canopy(i, exit) => {
                        let tree = &scene.trees[i];
                        let depth = Exp::new(tree.density).expect("positive density").sample(&mut rng);
                        let dist = dist + depth * ce;
                        let z = z_at(dist);
                        if dist < exit && z >= 0.0 && z <= tree.height {
                            hit = Some((dist, SemanticClass::Vegetation));
                        }
                    }
                }
                if hit.is_some() {
                    break;
                }
            }
            if hit.is_none() {
                if let Some(g) = ground {
                    hit = Some((g, SemanticClass::Noise));
                }
            }
            let Some((dist, class)) = hit else { continue };
            let range = dist / ce + noise.sample(&mut rng);
            if range < sensor.min_range || range > sensor.max_range {
                continue;
            }
            let (sa, ca) = az.sin_cos();
            points.push(
                Point3::new(T::lit(range * ce * ca), T::lit(range * ce * sa), T::lit(range * se))
                    .with_intensity(T::lit(intensity(class))),
            );
            truth.push(class);
        }
    }
    let labels = truth
        .iter()
        .map(|&c| {
            let u: f64 = rng.random();
            match c {
                SemanticClass::Building if u < corruption.building_to_vegetation_rate => SemanticClass::Vegetation,
                SemanticClass::Vegetation if u < corruption.vegetation_to_building_rate => SemanticClass::Building,
                other => other,
            }
        })
        .collect();
    Ok(LidarFrame {
        cloud: LabeledCloud::new(points, labels)?,
        truth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarSensor {
    pub azimuth_bins: usize,
    pub range_bins: usize,
    pub range_resolution: f64,
    /// Mean of the exponential noise floor.
    pub noise_mean: f64,
    pub building_power: f64,
    pub vehicle_power: f64,
    pub vegetation_power: f64,
    pub vegetation_min_bins: usize,
    pub vegetation_max_bins: usize,
    /// Weights spreading each return over the previous, own and next
    /// azimuth row.
    pub azimuth_smear: [f64; 3],
}

impl Default for RadarSensor {
    fn default() -> Self {
        Self {
            azimuth_bins: 400,
            range_bins: 320,
            range_resolution: 0.25,
            noise_mean: 0.05,
            building_power: 1.0,
            vehicle_power: 1.0,
            vegetation_power: 0.6,
            vegetation_min_bins: 3,
            vegetation_max_bins: 6,
            azimuth_smear: [0.5, 1.0, 0.5],
        }
    }
}

impl RadarSensor {
    pub fn grid<T: Real>(&self) -> Result<GridSpec<T>> {
        GridSpec::new(self.azimuth_bins, self.range_bins, T::lit(self.range_resolution))
    }
}

/// Simulated scan plus the cells that received signal from each class.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarFrame<T> {
    pub scan: PolarScan<T>,
    pub sources: ClassRaster<T>,
}

pub fn simulate_radar<T: Real>(
    scene: &SceneSpec,
    pose: &Pose2<f64>,
    time: f64,
    sensor: &RadarSensor,
    seed: u64,
) -> Result<RadarFrame<T>> {
    if !scene.contains(pose.translation()) {
        return Err(Error::contract("sensor pose lies outside the scene extent"));
    }
    if sensor.vegetation_min_bins == 0 || sensor.vegetation_min_bins > sensor.vegetation_max_bins || !(sensor.noise_mean > 0.0) {
        return Err(Error::Invalid("radar vegetation spread and noise mean must be positive".into()));
    }
    let grid = sensor.grid::<T>()?;
    let (na, nr, res) = (sensor.azimuth_bins, sensor.range_bins, sensor.range_resolution);
    let max_range = nr as f64 * res;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut power = vec![0.0f64; na * nr];
    let mut sources = ClassRaster::empty(grid, time);
    let o = pose.translation();
    for a in 0..na {
        let az = std::f64::consts::TAU * (a as f64 + 0.5) / na as f64;
        let world = pose.theta + az;
        let hits = cast(scene, o, [world.cos(), world.sin()], time, max_range);
        let Some(&(dist, surface)) = hits.first() else { continue };
        let first = (dist / res) as usize;
        let mut returns: Vec<(usize, f64)> = Vec::new();
        match surface {
            Surface::Wall(_) => returns.push((first, sensor.building_power)),
            Surface::Vehicle(_) => returns.push((first, sensor.vehicle_power)),
            Surface::Canopy(..) => {
                let n = rng.random_range(sensor.vegetation_min_bins..=sensor.vegetation_max_bins);
                for k in 0..n {
                    returns.push((first + k, sensor.vegetation_power * rng.random_range(0.6..1.0)));
                }
            }
        }
        let class = surface.class();
        for (offset, &w) in sensor.azimuth_smear.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = (a + na + offset - 1) % na;
            for &(r, p) in &returns {
                if r < nr {
                    power[row * nr + r] += w * p;
                    sources.channel_mut(class).expect("projected class").set(row, r, true);
                }
            }
        }
    }
    let floor = Exp::new(1.0 / sensor.noise_mean).expect("positive mean");
    let power = power.into_iter().map(|p| T::lit(p + floor.sample(&mut rng))).collect();
    Ok(RadarFrame {
        scan: PolarScan::new(grid, power, time)?,
        sources,
    })
}

/// Radar frames along a trajectory, one independent noise stream per frame.
pub fn radar_sequence<T: Real>(
    scene: &SceneSpec,
    traj: &Trajectory<f64>,
    sensor: &RadarSensor,
    seed: u64,
) -> Result<Vec<RadarFrame<T>>> {
    traj.iter()
        .enumerate()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(i, (t, pose))| simulate_radar(scene, pose, t, sensor, frame_seed(seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radarproc::k_strongest;
    use crate::synthworld::scene::{rectangle, Building, Tree};

    fn wall_scene() -> SceneSpec {
        let mut s = SceneSpec::empty([-100.0, -100.0, 100.0, 100.0], 3);
        s.buildings.push(Building {
            id: 1,
            footprint: rectangle([21.0, 0.0], 0.0, 2.0, 60.0),
            height: 8.0,
        });
        s
    }

    #[test]
    fn lidar_corruption_examples() {
        let scene = wall_scene();
        let sensor = LidarSensor::default();
        let clean = simulate_lidar::<f64>(&scene, &Pose2::identity(), 0.0, &sensor, &CorruptionSpec::default(), 1).unwrap();
        assert!(clean.cloud.count(SemanticClass::Building) > 100);
        assert_eq!(clean.cloud.labels(), clean.truth.as_slice());
        let all = CorruptionSpec {
            building_to_vegetation_rate: 1.0,
            vegetation_to_building_rate: 0.0,
        };
        let flipped = simulate_lidar::<f64>(&scene, &Pose2::identity(), 0.0, &sensor, &all, 1).unwrap();
        assert_eq!(flipped.cloud.count(SemanticClass::Building), 0);
        assert_eq!(flipped.truth, clean.truth);
        for (l, t) in flipped.cloud.labels().iter().zip(&flipped.truth) {
            if *t == SemanticClass::Building {
                assert_eq!(*l, SemanticClass::Vegetation);
            }
        }
        // wall points sit at 20 m, ground below the sensor
        for (p, t) in flipped.cloud.points().iter().zip(&flipped.truth) {
            match t {
                SemanticClass::Building => assert!((p.x - 20.0).abs() < 0.2),
                SemanticClass::Noise => assert!((p.z + 1.8).abs() < 0.2),
                _ => {}
            }
        }
    }

    #[test]
    fn lidar_is_deterministic() {
        let mut scene = wall_scene();
        scene.trees.push(Tree {
            center: [8.0, 5.0],
            radius: 2.0,
            height: 6.0,
            density: 1.5,
        });
        let c = CorruptionSpec {
            building_to_vegetation_rate: 0.2,
            vegetation_to_building_rate: 0.2,
        };
        let a = simulate_lidar::<f64>(&scene, &Pose2::new(1.0, 2.0, 0.3), 0.0, &LidarSensor::default(), &c, 9).unwrap();
        let b = simulate_lidar::<f64>(&scene, &Pose2::new(1.0, 2.0, 0.3), 0.0, &LidarSensor::default(), &c, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.truth.contains(&SemanticClass::Vegetation));
    }

    #[test]
    fn radar_wall_peak_and_determinism() {
        let scene = wall_scene();
        let sensor = RadarSensor::default();
        let f = simulate_radar::<f64>(&scene, &Pose2::identity(), 0.0, &sensor, 5).unwrap();
        let g = simulate_radar::<f64>(&scene, &Pose2::identity(), 0.0, &sensor, 5).unwrap();
        assert_eq!(f, g);
        // broadside rows at azimuth ~0 and ~2pi
        for a in [0usize, 1, 398, 399] {
            let row = f.scan.row(a);
            let best = (0..row.len()).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap();
            assert_eq!(best, 80, "row {a}");
            assert!(f.sources.building.get(a, 80));
        }
        let pts = k_strongest(&f.scan, 1, 0.9).unwrap();
        assert!(pts.len() > 100);
        assert!(pts.points.iter().all(|p| p.x > 19.0));
    }

    #[test]
    fn empty_scene_is_noise() {
        let scene = SceneSpec::empty([-10.0, -10.0, 10.0, 10.0], 0);
        let f = simulate_radar::<f64>(&scene, &Pose2::identity(), 0.0, &RadarSensor::default(), 1).unwrap();
        assert!(f.sources.channels().iter().all(|m| m.count() == 0));
        let mean = f.scan.power().iter().sum::<f64>() / f.scan.power().len() as f64;
        assert!((mean - 0.05).abs() < 0.002);
    }
}
