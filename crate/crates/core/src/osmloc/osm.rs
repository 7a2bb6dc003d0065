use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mean Earth radius, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Tangent-plane origin for the equirectangular projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoOrigin {
    pub lat: f64,
    pub lon: f64,
}

impl GeoOrigin {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(lat.abs() < 90.0 && lon.abs() <= 180.0) {
            return Err(Error::Invalid(format!("origin {lat},{lon} is not a valid latitude/longitude")));
        }
        Ok(Self { lat, lon })
    }

    /// `"lat,lon"`.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::Invalid(format!("origin '{s}' is not 'lat,lon'")))?;
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("origin '{s}' is not 'lat,lon'")))
        };
        Self::new(num(a)?, num(b)?)
    }

    /// East/north meters of a lat/lon about the origin.
    pub fn project(&self, lat: f64, lon: f64) -> [f64; 2] {
        let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        [k * (lon - self.lon) * self.lat.to_radians().cos(), k * (lat - self.lat)]
    }

    pub fn unproject(&self, p: [f64; 2]) -> (f64, f64) {
        let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        (self.lat + p[1] / k, self.lon + p[0] / (k * self.lat.to_radians().cos()))
    }
}

/// One footprint edge, counter-clockwise within its building so the outward
/// normal is the direction rotated by -90 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallSegment<T> {
    pub a: [T; 2],
    pub b: [T; 2],
    pub wall_id: usize,
    pub building_id: i64,
}

impl<T: Real> WallSegment<T> {
    pub fn length(&self) -> T {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    pub fn direction(&self) -> [T; 2] {
        let l = self.length();
        [(self.b[0] - self.a[0]) / l, (self.b[1] - self.a[1]) / l]
    }

    pub fn outward_normal(&self) -> [T; 2] {
        let d = self.direction();
        [d[1], -d[0]]
    }

    /// Closest point on the segment and the distance to it.
    pub fn closest(&self, p: [T; 2]) -> ([T; 2], T) {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let l2 = d[0] * d[0] + d[1] * d[1];
        let t = (((p[0] - self.a[0]) * d[0] + (p[1] - self.a[1]) * d[1]) / l2)
            .max(T::zero())
            .min(T::one());
        let q = [self.a[0] + d[0] * t, self.a[1] + d[1] * t];
        (q, (p[0] - q[0]).hypot(p[1] - q[1]))
    }

    pub fn translated(&self, t: [T; 2]) -> Self {
        Self {
            a: [self.a[0] + t[0], self.a[1] + t[1]],
            b: [self.b[0] + t[0], self.b[1] + t[1]],
            ..*self
        }
    }
}

fn is_building(way: roxmltree::Node<'_, '_>) -> bool {
    way.children()
        .any(|t| t.has_tag_name("tag") && t.attribute("k") == Some("building") && t.attribute("v") != Some("no"))
}

/// Building footprints from an OSM XML document, projected about `origin`.
///
/// Only closed ways tagged `building` contribute; each yields one segment per
/// distinct vertex, oriented counter-clockwise. Wall ids follow document
/// order.
pub fn parse_osm<T: Real>(document: &str, origin: &GeoOrigin) -> Result<Vec<WallSegment<T>>> {
    let doc = roxmltree::Document::parse(document)?;
    let mut nodes: HashMap<i64, (f64, f64)> = HashMap::new();
    for n in doc.descendants().filter(|n| n.has_tag_name("node")) {
        let attr = |k: &str| n.attribute(k).and_then(|v| v.parse::<f64>().ok());
        let (Some(id), Some(lat), Some(lon)) = (n.attribute("id").and_then(|v| v.parse().ok()), attr("lat"), attr("lon")) else {
            return Err(Error::Invalid(format!("node without id/lat/lon at byte {}", n.range().start)));
        };
        nodes.insert(id, (lat, lon));
    }

    let mut out = Vec::new();
    for way in doc.descendants().filter(|n| n.has_tag_name("way")) {
        if !is_building(way) {
            continue;
        }
        let way_id: i64 = way
            .attribute("id")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Invalid("building way without an id".into()))?;
        let refs: Vec<i64> = way
            .children()
            .filter(|c| c.has_tag_name("nd"))
            .filter_map(|c| c.attribute("ref").and_then(|v| v.parse().ok()))
            .collect();
        if refs.len() < 4 || refs.first() != refs.last() {
            continue;
        }
        let mut ring = Vec::with_capacity(refs.len() - 1);
        for r in &refs[..refs.len() - 1] {
            let &(lat, lon) = nodes.get(r).ok_or(Error::MissingNode { way: way_id, node: *r })?;
            let p = origin.project(lat, lon);
            if ring.last() != Some(&p) {
                ring.push(p);
            }
        }
        if ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            continue;
        }
        if signed_area(&ring) < 0.0 {
            ring.reverse();
        }
        for i in 0..ring.len() {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            out.push(WallSegment {
                a: [T::lit(a[0]), T::lit(a[1])],
                b: [T::lit(b[0]), T::lit(b[1])],
                wall_id: out.len(),
                building_id: way_id,
            });
        }
    }
    Ok(out)
}

fn signed_area(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (p, q) = (ring[i], ring[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Serializes footprints (local meters) as an OSM document with one closed
/// `building=yes` way per polygon. Node ids are assigned sequentially.
pub fn write_osm(buildings: &[(i64, Vec<[f64; 2]>)], origin: &GeoOrigin) -> String {
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"rsl\">\n");
    let mut next = 1i64;
    let mut ways = String::new();
    for (id, ring) in buildings {
        let first = next;
        for p in ring {
            let (lat, lon) = origin.unproject(*p);
            let _ = writeln!(s, "  <node id=\"{next}\" lat=\"{lat:.10}\" lon=\"{lon:.10}\"/>");
            next += 1;
        }
        let _ = writeln!(ways, "  <way id=\"{id}\">");
        for k in first..next {
            let _ = writeln!(ways, "    <nd ref=\"{k}\"/>");
        }
        let _ = writeln!(ways, "    <nd ref=\"{first}\"/>\n    <tag k=\"building\" v=\"yes\"/>\n  </way>");
    }
    s.push_str(&ways);
    s.push_str("</osm>\n");
    s
}

/// Uniform grid over segments for gated nearest-wall queries.
#[derive(Debug, Clone)]
pub struct MapIndex<T> {
    segments: Vec<WallSegment<T>>,
    cell: T,
    grid: HashMap<(i64, i64), Vec<usize>>,
}

impl<T: Real> MapIndex<T> {
    pub fn new(segments: Vec<WallSegment<T>>, cell: T) -> Result<Self> {
        if !(cell > T::zero()) {
            return Err(Error::contract("map index cell must be positive"));
        }
        if let Some(s) = segments.iter().find(|s| !(s.length() > T::zero())) {
            return Err(Error::Invalid(format!("wall {} has zero length", s.wall_id)));
        }
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, s) in segments.iter().enumerate() {
            // rasterize the segment by sampling at half-cell spacing
            let n = (s.length() / (cell * T::lit(0.5))).ceil().to_usize().unwrap_or(1).max(1);
            for k in 0..=n {
                let t = T::from_count(k) / T::from_count(n);
                let p = [s.a[0] + (s.b[0] - s.a[0]) * t, s.a[1] + (s.b[1] - s.a[1]) * t];
                let key = Self::key(p, cell);
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        let e = grid.entry((key.0 + dx, key.1 + dy)).or_default();
                        if e.last() != Some(&i) {
                            e.push(i);
                        }
                    }
                }
            }
        }
        for v in grid.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        Ok(Self { segments, cell, grid })
    }

    fn key(p: [T; 2], cell: T) -> (i64, i64) {
        (
            (p[0] / cell).floor().to_i64().unwrap_or(i64::MAX / 2),
            (p[1] / cell).floor().to_i64().unwrap_or(i64::MAX / 2),
        )
    }

    pub fn segments(&self) -> &[WallSegment<T>] {
        &self.segments
    }

    /// Candidate segments near `p`; complete for any segment within half a
    /// cell of `p`.
    pub fn candidates(&self, p: [T; 2]) -> &[usize] {
        self.grid.get(&Self::key(p, self.cell)).map_or(&[], |v| v.as_slice())
    }

    pub fn cell(&self) -> T {
        self.cell
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = r#"<osm>
        <node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.0001"/>
        <node id="3" lat="0.0001" lon="0.0001"/><node id="4" lat="0.0001" lon="0"/>
        <way id="7"><nd ref="1"/><nd ref="4"/><nd ref="3"/><nd ref="2"/><nd ref="1"/><tag k="building" v="yes"/></way>
        <way id="8"><nd ref="1"/><nd ref="2"/><tag k="highway" v="residential"/></way>
    </osm>"#;

    #[test]
    fn square_building() {
        let walls = parse_osm::<f64>(SQUARE, &GeoOrigin::new(0.0, 0.0).unwrap()).unwrap();
        assert_eq!(walls.len(), 4);
        // written clockwise, stored counter-clockwise
        let ring: Vec<[f64; 2]> = walls.iter().map(|w| w.a).collect();
        assert!(signed_area(&ring) > 0.0);
        for w in &walls {
            assert_eq!(w.building_id, 7);
            assert!((w.length() - 11.1195).abs() < 1e-3);
        }
    }

    #[test]
    fn missing_node_names_the_way() {
        let doc = r#"<osm><node id="1" lat="0" lon="0"/>
            <way id="42"><nd ref="1"/><nd ref="9"/><nd ref="1"/><nd ref="1"/><tag k="building" v="house"/></way></osm>"#;
        match parse_osm::<f64>(doc, &GeoOrigin::new(0.0, 0.0).unwrap()) {
            Err(Error::MissingNode { way: 42, node: 9 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn roundtrip_through_xml() {
        let origin = GeoOrigin::new(48.1, 11.5).unwrap();
        let ring = vec![[10.0, 5.0], [30.0, 5.0], [30.0, 25.0], [10.0, 25.0]];
        let xml = write_osm(&[(3, ring.clone())], &origin);
        let walls = parse_osm::<f64>(&xml, &origin).unwrap();
        assert_eq!(walls.len(), 4);
        for (w, p) in walls.iter().zip(&ring) {
            assert!((w.a[0] - p[0]).abs() < 1e-4 && (w.a[1] - p[1]).abs() < 1e-4);
        }
    }

    #[test]
    fn index_finds_nearby_walls() {
        let walls = vec![WallSegment {
            a: [0.0, 0.0],
            b: [50.0, 0.0],
            wall_id: 0,
            building_id: 1,
        }];
        let idx = MapIndex::new(walls, 2.0).unwrap();
        assert_eq!(idx.candidates([25.0, 0.9]), &[0]);
        assert!(idx.candidates([25.0, 9.0]).is_empty());
        assert!(MapIndex::new(vec![WallSegment { a: [1.0, 1.0], b: [1.0, 1.0], wall_id: 0, building_id: 0 }], 2.0).is_err());
    }
}
