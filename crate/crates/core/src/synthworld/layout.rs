use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::synthworld::scene::{
    point_in_polygon, polygon_distance, rectangle, segment_distance, Building, SceneSpec, Tree, Vehicle,
};
use crate::types::Trajectory;

/// Ranges are `[min, max]` and sampled uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutParams {
    pub building_setback: [f64; 2],
    pub building_length: [f64; 2],
    pub building_depth: [f64; 2],
    pub building_gap: [f64; 2],
    pub building_height: [f64; 2],
    /// Minimum distance from any building to the driven path.
    pub clearance: f64,
    pub tree_spacing: [f64; 2],
    pub tree_offset: [f64; 2],
    pub tree_radius: [f64; 2],
    pub tree_height: [f64; 2],
    pub tree_density: [f64; 2],
    /// Moving vehicles per 100 m of path.
    pub moving_per_100m: f64,
    pub vehicle_speed: [f64; 2],
    pub vehicle_run: [f64; 2],
    pub lane_offset: f64,
    pub parked_per_100m: f64,
    pub parked_offset: f64,
    pub vehicle_size: [f64; 3],
    /// Scene extent beyond the path bounding box; building rows also
    /// continue this far past both path ends.
    pub margin: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            building_setback: [9.0, 13.0],
            building_length: [10.0, 24.0],
            building_depth: [8.0, 14.0],
            building_gap: [2.0, 10.0],
            building_height: [6.0, 20.0],
            clearance: 7.0,
            tree_spacing: [8.0, 20.0],
            tree_offset: [5.0, 6.5],
            tree_radius: [1.2, 2.2],
            tree_height: [3.0, 8.0],
            tree_density: [0.8, 1.5],
            moving_per_100m: 3.0,
            vehicle_speed: [4.0, 9.0],
            vehicle_run: [20.0, 50.0],
            lane_offset: 2.0,
            parked_per_100m: 2.0,
            parked_offset: 4.2,
            vehicle_size: [4.5, 1.9, 1.5],
            margin: 60.0,
        }
    }
}

struct Path {
    pts: Vec<[f64; 2]>,
    heading: Vec<f64>,
    arc: Vec<f64>,
}

impl Path {
    fn new<T: Real>(traj: &Trajectory<T>) -> Self {
        let pts: Vec<[f64; 2]> = traj.poses().iter().map(|p| [p.x.as_f64(), p.y.as_f64()]).collect();
        let heading = traj.poses().iter().map(|p| p.theta.as_f64()).collect();
        let arc = traj.path_distances().iter().map(|d| d.as_f64()).collect();
        Self { pts, heading, arc }
    }

    fn length(&self) -> f64 {
        *self.arc.last().unwrap_or(&0.0)
    }

    /// Position and heading at arc length `s` (nearest pose at or after).
    fn at(&self, s: f64) -> ([f64; 2], f64) {
        let i = self.arc.partition_point(|&a| a < s).min(self.pts.len() - 1);
        (self.pts[i], self.heading[i])
    }

    fn distance(&self, p: [f64; 2]) -> f64 {
        if self.pts.len() == 1 {
            return (p[0] - self.pts[0][0]).hypot(p[1] - self.pts[0][1]);
        }
        self.pts
            .windows(2)
            .map(|w| segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    fn polygon_distance(&self, poly: &[[f64; 2]]) -> f64 {
        let mut best = f64::INFINITY;
        for q in &self.pts {
            if point_in_polygon(*q, poly) {
                return 0.0;
            }
        }
        let n = poly.len();
        for i in 0..n {
            best = best.min(self.distance(poly[i]));
            for w in self.pts.windows(2) {
                best = best.min(segment_distance(w[0], poly[i], poly[(i + 1) % n]));
            }
        }
        best
    }
}

fn segments_distance(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> f64 {
    let cross = |o: [f64; 2], p: [f64; 2], q: [f64; 2]| (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0]);
    let d1 = cross(b0, b1, a0);
    let d2 = cross(b0, b1, a1);
    let d3 = cross(a0, a1, b0);
    let d4 = cross(a0, a1, b1);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    segment_distance(a0, b0, b1)
        .min(segment_distance(a1, b0, b1))
        .min(segment_distance(b0, a0, a1))
        .min(segment_distance(b1, a0, a1))
}

fn polygons_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    if a.iter().any(|p| point_in_polygon(*p, b)) || b.iter().any(|p| point_in_polygon(*p, a)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..a.len() {
        for j in 0..b.len() {
            best = best.min(segments_distance(a[i], a[(i + 1) % a.len()], b[j], b[(j + 1) % b.len()]));
        }
    }
    best
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

impl SceneSpec {
    /// Lines both sides of a driven path with buildings, puts trees between
    /// road and facades and adds moving and parked vehicles.
    pub fn along_path<T: Real>(traj: &Trajectory<T>, params: &LayoutParams, seed: u64) -> Result<SceneSpec> {
        if traj.is_empty() {
            return Err(Error::contract("layout needs a non-empty trajectory"));
        }
        let path = Path::new(traj);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &path.pts {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        let m = params.margin;
        let mut scene = SceneSpec::empty([x0 - 2.0 * m, y0 - 2.0 * m, x1 + 2.0 * m, y1 + 2.0 * m], seed);
        let total = path.length();
        let inside = |scene: &SceneSpec, poly: &[[f64; 2]]| poly.iter().all(|p| scene.contains(*p));

        for side in [1.0, -1.0] {
            let mut s = uniform(&mut rng, [0.0, params.building_gap[1]]) - params.margin;
            while s < total + params.margin {
                let len = uniform(&mut rng, params.building_length);
                let depth = uniform(&mut rng, params.building_depth);
                let setback = uniform(&mut rng, params.building_setback);
                let height = uniform(&mut rng, params.building_height);
                let gap = uniform(&mut rng, params.building_gap);
                let base = s.clamp(0.0, total);
                let (p, h) = path.at(base);
                let dir = [h.cos(), h.sin()];
                let normal = [-side * h.sin(), side * h.cos()];
                let along = s - base + 0.5 * len;
                let off = setback + 0.5 * depth;
                let c = [p[0] + dir[0] * along + normal[0] * off, p[1] + dir[1] * along + normal[1] * off];
                let footprint = rectangle(c, h, len, depth);
                let clear = path.polygon_distance(&footprint) >= params.clearance;
                let apart = scene.buildings.iter().all(|b| polygons_distance(&b.footprint, &footprint) >= 1.0);
                if clear && apart && inside(&scene, &footprint) {
                    scene.buildings.push(Building {
                        id: scene.buildings.len() as i64 + 1,
                        footprint,
                        height,
                    });
                }
                s += len + gap;
            }
        }

        let mut s = uniform(&mut rng, params.tree_spacing);
        while s < total {
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let (p, h) = path.at(s);
            let off = uniform(&mut rng, params.tree_offset);
            let radius = uniform(&mut rng, params.tree_radius);
            let center = [p[0] - side * h.sin() * off, p[1] + side * h.cos() * off];
            let tree = Tree {
                center,
                radius,
                height: uniform(&mut rng, params.tree_height),
                density: uniform(&mut rng, params.tree_density),
            };
            let clear = path.distance(center) >= radius + 2.5
                && scene.buildings.iter().all(|b| polygon_distance(center, &b.footprint) >= radius + 0.5)
                && scene
                    .trees
                    .iter()
                    .all(|t| (t.center[0] - center[0]).hypot(t.center[1] - center[1]) >= t.radius + radius + 0.5);
            if clear && scene.contains(center) {
                scene.trees.push(tree);
            }
            s += uniform(&mut rng, params.tree_spacing);
        }

        let [vl, vw, vh] = params.vehicle_size;
        let moving = (params.moving_per_100m * total / 100.0).round() as usize;
        for _ in 0..moving {
            let s = rng.random_range(0.0..total.max(1e-9));
            let (p, h) = path.at(s);
            let oncoming = rng.random_bool(0.5);
            let side = if oncoming { 1.0 } else { -1.0 };
            let normal = [-side * h.sin() * params.lane_offset, side * h.cos() * params.lane_offset];
            let run = uniform(&mut rng, params.vehicle_run);
            let sign = if oncoming { -1.0 } else { 1.0 };
            let start = [p[0] + normal[0], p[1] + normal[1]];
            let end = [start[0] + sign * h.cos() * run, start[1] + sign * h.sin() * run];
            let speed = uniform(&mut rng, params.vehicle_speed);
            let phase = rng.random_range(0.0..2.0 * run);
            let on_road = |q: [f64; 2]| (path.distance(q) - params.lane_offset).abs() < 1.0;
            let mid = [0.5 * (start[0] + end[0]), 0.5 * (start[1] + end[1])];
            if on_road(start) && on_road(end) && on_road(mid) && scene.contains(start) && scene.contains(end) {
                scene.vehicles.push(Vehicle {
                    start,
                    end,
                    speed,
                    phase,
                    length: vl,
                    width: vw,
                    height: vh,
                });
            }
        }
        let parked = (params.parked_per_100m * total / 100.0).round() as usize;
        for _ in 0..parked {
            let s = rng.random_range(0.0..total.max(1e-9));
            let (p, h) = path.at(s);
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let c = [p[0] - side * h.sin() * params.parked_offset, p[1] + side * h.cos() * params.parked_offset];
            let box_ = rectangle(c, h, vl, vw);
            let clear = path.polygon_distance(&box_) >= 2.5
                && scene.trees.iter().all(|t| polygon_distance(t.center, &box_) >= t.radius + 0.3)
                && scene.buildings.iter().all(|b| polygons_distance(&b.footprint, &box_) >= 0.5);
            if clear && scene.contains(c) {
                scene.vehicles.push(Vehicle {
                    start: c,
                    end: c,
                    speed: 0.0,
                    phase: 0.0,
                    length: vl,
                    width: vw,
                    height: vh,
                });
            }
        }
        scene.validate()?;
        Ok(scene)
    }
}
