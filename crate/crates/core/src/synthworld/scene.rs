use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SemanticClass;

/// Building footprint as a counter-clockwise polygon, meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: i64,
    pub footprint: Vec<[f64; 2]>,
    pub height: f64,
}

/// Vegetation disk. `density` is the LiDAR extinction rate per meter of
/// canopy traversed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
    pub density: f64,
}

/// Box driving back and forth between `start` and `end` at `speed`;
/// `phase` is the arc length already covered at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub speed: f64,
    #[serde(default)]
    pub phase: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Vehicle {
    pub fn position(&self, t: f64) -> [f64; 2] {
        let d = [self.end[0] - self.start[0], self.end[1] - self.start[1]];
        let len = d[0].hypot(d[1]);
        if len == 0.0 || self.speed == 0.0 {
            return self.start;
        }
        let mut s = (self.phase + self.speed * t).rem_euclid(2.0 * len);
        if s > len {
            s = 2.0 * len - s;
        }
        [self.start[0] + d[0] / len * s, self.start[1] + d[1] / len * s]
    }

    pub fn heading(&self) -> f64 {
        let d = [self.end[0] - self.start[0], self.end[1] - self.start[1]];
        if d == [0.0, 0.0] {
            0.0
        } else {
            d[1].atan2(d[0])
        }
    }

    /// Counter-clockwise box corners at time `t`.
    pub fn footprint(&self, t: f64) -> Vec<[f64; 2]> {
        rectangle(self.position(t), self.heading(), self.length, self.width)
    }
}

/// Counter-clockwise corners of a `length x width` rectangle centered at `c`
/// with its long axis along `heading`.
pub fn rectangle(c: [f64; 2], heading: f64, length: f64, width: f64) -> Vec<[f64; 2]> {
    let (s, co) = heading.sin_cos();
    let (hl, hw) = (0.5 * length, 0.5 * width);
    [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)]
        .iter()
        .map(|&(u, v)| [c[0] + co * u - s * v, c[1] + s * u + co * v])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// `[x_min, y_min, x_max, y_max]`.
    pub extent: [f64; 4],
    #[serde(default)]
    pub buildings: Vec<Building>,
    #[serde(default)]
    pub trees: Vec<Tree>,
    #[serde(default)]
    pub vehicles: Vec<Vehicle>,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn empty(extent: [f64; 4], seed: u64) -> Self {
        Self {
            extent,
            buildings: Vec::new(),
            trees: Vec::new(),
            vehicles: Vec::new(),
            seed,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.extent[0] && p[0] <= self.extent[2] && p[1] >= self.extent[1] && p[1] <= self.extent[3]
    }

    pub fn validate(&self) -> Result<()> {
        let [x0, y0, x1, y1] = self.extent;
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::Invalid("scene extent must have min < max".into()));
        }
        for b in &self.buildings {
            if b.footprint.len() < 3 || !(b.height > 0.0) {
                return Err(Error::Invalid(format!("building {} needs >= 3 vertices and positive height", b.id)));
            }
            if signed_area(&b.footprint) <= 0.0 {
                return Err(Error::Invalid(format!("building {} footprint is not counter-clockwise", b.id)));
            }
            if b.footprint.iter().any(|p| !self.contains(*p)) {
                return Err(Error::Invalid(format!("building {} leaves the scene extent", b.id)));
            }
        }
        for t in &self.trees {
            if !(t.radius > 0.0 && t.height > 0.0 && t.density > 0.0) {
                return Err(Error::Invalid("tree radius, height and density must be positive".into()));
            }
            if !self.contains(t.center) {
                return Err(Error::Invalid("tree center leaves the scene extent".into()));
            }
        }
        for v in &self.vehicles {
            if !(v.length > 0.0 && v.width > 0.0 && v.height > 0.0 && v.speed >= 0.0) {
                return Err(Error::Invalid("vehicle dimensions must be positive".into()));
            }
            if !self.contains(v.start) || !self.contains(v.end) {
                return Err(Error::Invalid("vehicle path leaves the scene extent".into()));
            }
        }
        Ok(())
    }
}

pub fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
}

/// Distance to the polygon outline; zero inside.
pub fn polygon_distance(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    if point_in_polygon(p, poly) {
        return 0.0;
    }
    boundary_distance(p, poly)
}

pub fn boundary_distance(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| segment_distance(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Surface hit by a horizontal ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    /// Wall of building index `usize`.
    Wall(usize),
    /// Canopy of tree index, with the horizontal exit distance.
    Canopy(usize, f64),
    Vehicle(usize),
}

impl Surface {
    pub fn class(self) -> SemanticClass {
        match self {
            Surface::Wall(_) => SemanticClass::Building,
            Surface::Canopy(..) => SemanticClass::Vegetation,
            Surface::Vehicle(_) => SemanticClass::Vehicle,
        }
    }
}

fn ray_polygon(o: [f64; 2], d: [f64; 2], poly: &[[f64; 2]]) -> Option<f64> {
    let n = poly.len();
    let mut best: Option<f64> = None;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let den = d[0] * e[1] - d[1] * e[0];
        if den.abs() < 1e-12 {
            continue;
        }
        let w = [a[0] - o[0], a[1] - o[1]];
        let t = (w[0] * e[1] - w[1] * e[0]) / den;
        let u = (w[0] * d[1] - w[1] * d[0]) / den;
        if t > 1e-9 && (0.0..=1.0).contains(&u) && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    }
    best
}

fn ray_circle(o: [f64; 2], d: [f64; 2], c: [f64; 2], r: f64) -> Option<(f64, f64)> {
    let w = [o[0] - c[0], o[1] - c[1]];
    let b = w[0] * d[0] + w[1] * d[1];
    let cc = w[0] * w[0] + w[1] * w[1] - r * r;
    let disc = b * b - cc;
    if disc < 0.0 || cc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = -b - s;
    (t0 > 0.0).then_some((t0, -b + s))
}

/// All surfaces crossed by the horizontal ray from `o` along unit `d`,
/// nearest first, with their entry distance. Vehicles are placed at time `t`.
pub fn cast(scene: &SceneSpec, o: [f64; 2], d: [f64; 2], t: f64, max_range: f64) -> Vec<(f64, Surface)> {
    let mut hits = Vec::new();
    for (i, b) in scene.buildings.iter().enumerate() {
        if let Some(dist) = ray_polygon(o, d, &b.footprint) {
            if dist <= max_range {
                hits.push((dist, Surface::Wall(i)));
            }
        }
    }
    for (i, tr) in scene.trees.iter().enumerate() {
        if let Some((t0, t1)) = ray_circle(o, d, tr.center, tr.radius) {
            if t0 <= max_range {
                hits.push((t0, Surface::Canopy(i, t1)));
            }
        }
    }
    for (i, v) in scene.vehicles.iter().enumerate() {
        if let Some(dist) = ray_polygon(o, d, &v.footprint(t)) {
            if dist <= max_range {
                hits.push((dist, Surface::Vehicle(i)));
            }
        }
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    hits
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_hits_nearest_wall() {
        let mut scene = SceneSpec::empty([-50.0, -50.0, 50.0, 50.0], 0);
        scene.buildings.push(Building {
            id: 1,
            footprint: rectangle([25.0, 0.0], 0.0, 10.0, 10.0),
            height: 10.0,
        });
        scene.trees.push(Tree {
            center: [10.0, 0.0],
            radius: 2.0,
            height: 5.0,
            density: 1.0,
        });
        scene.validate().unwrap();
        let hits = cast(&scene, [0.0, 0.0], [1.0, 0.0], 0.0, 100.0);
        assert_eq!(hits.len(), 2);
        assert!((hits[0].0 - 8.0).abs() < 1e-12 && matches!(hits[0].1, Surface::Canopy(0, e) if (e - 12.0).abs() < 1e-12));
        assert!((hits[1].0 - 20.0).abs() < 1e-12);
        assert!(cast(&scene, [0.0, 0.0], [-1.0, 0.0], 0.0, 100.0).is_empty());
        assert!(cast(&scene, [0.0, 0.0], [1.0, 0.0], 0.0, 15.0).len() == 1);
    }

    #[test]
    fn vehicle_ping_pongs() {
        let v = Vehicle {
            start: [0.0, 0.0],
            end: [10.0, 0.0],
            speed: 2.0,
            phase: 0.0,
            length: 4.0,
            width: 2.0,
            height: 1.5,
        };
        assert_eq!(v.position(2.5), [5.0, 0.0]);
        assert_eq!(v.position(7.5), [5.0, 0.0]);
        assert_eq!(v.position(10.0), [0.0, 0.0]);
    }

    #[test]
    fn polygon_helpers() {
        let sq = rectangle([0.0, 0.0], 0.0, 2.0, 2.0);
        assert!(signed_area(&sq) > 0.0);
        assert!(point_in_polygon([0.5, 0.5], &sq) && !point_in_polygon([1.5, 0.0], &sq));
        assert!((polygon_distance([3.0, 0.0], &sq) - 2.0).abs() < 1e-12);
        assert_eq!(polygon_distance([0.0, 0.0], &sq), 0.0);
        assert!((boundary_distance([0.0, 0.0], &sq) - 1.0).abs() < 1e-12);
    }
}
