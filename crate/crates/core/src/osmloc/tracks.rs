use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::se2::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackParams {
    pub alpha_up: f64,
    pub alpha_down: f64,
    /// Per-frame factor pulling unseen weights back toward 1.
    pub decay: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// Lateral offsets below this (meters) give no side.
    pub ambiguous_m: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            alpha_up: 1.2,
            alpha_down: 0.5,
            decay: 0.9,
            w_min: 0.2,
            w_max: 3.0,
            ambiguous_m: 0.2,
        }
    }
}

impl TrackParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha_up >= 1.0
            && self.alpha_down > 0.0
            && self.alpha_down <= 1.0
            && (0.0..=1.0).contains(&self.decay)
            && self.w_min > 0.0
            && self.w_min <= 1.0
            && self.w_max >= 1.0
            && self.ambiguous_m >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("inconsistent wall track parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallTrack {
    pub wall_id: usize,
    pub weight: f64,
    pub expected_side: Side,
}

/// One point-to-wall association from a map registration, in map frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallMatch<T> {
    pub wall_id: usize,
    pub point: [T; 2],
    /// Closest point on the wall.
    pub projection: [T; 2],
    pub residual: T,
    pub weight: T,
}

/// Side of `target` relative to a vehicle at `pose`: sign of
/// heading x (target - position). `None` inside the ambiguity band.
pub fn side_of<T: Real>(pose: &Pose2<T>, target: [T; 2], ambiguous: f64) -> Option<Side> {
    let (s, c) = pose.theta.sin_cos();
    let v = [target[0] - pose.x, target[1] - pose.y];
    let cross = (c * v[1] - s * v[0]).as_f64();
    if cross.abs() < ambiguous {
        None
    } else if cross > 0.0 {
        Some(Side::Left)
    } else {
        Some(Side::Right)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallTracks {
    pub params: TrackParams,
    tracks: BTreeMap<usize, WallTrack>,
}

impl WallTracks {
    pub fn new(params: TrackParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            tracks: BTreeMap::new(),
        })
    }

    /// Multiplier for points on `wall_id`; 1 for walls never tracked.
    pub fn weight(&self, wall_id: usize) -> f64 {
        self.tracks.get(&wall_id).map_or(1.0, |t| t.weight)
    }

    pub fn get(&self, wall_id: usize) -> Option<&WallTrack> {
        self.tracks.get(&wall_id)
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &WallTrack> + '_ {
        self.tracks.values()
    }

    pub fn insert(&mut self, track: WallTrack) {
        self.tracks.insert(track.wall_id, track);
    }
}

/// Advances the tracks by one frame of matches observed from `pose`.
///
/// A wall's side this frame is that of the mean lateral offset of its
/// matches' wall projections. Matched walls on their expected side gain
/// `alpha_up`, on the other side lose `alpha_down`; ambiguous walls keep their
/// weight; unmatched tracks relax toward 1 by `decay`.
pub fn update_wall_tracks<T: Real>(tracks: &mut WallTracks, matches: &[WallMatch<T>], pose: &Pose2<T>) {
    let p = tracks.params;
    let (s, c) = pose.theta.sin_cos();
    let mut lateral: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for m in matches {
        let v = [m.projection[0] - pose.x, m.projection[1] - pose.y];
        let e = lateral.entry(m.wall_id).or_insert((0.0, 0));
        e.0 += (c * v[1] - s * v[0]).as_f64();
        e.1 += 1;
    }
    for t in tracks.tracks.values_mut() {
        if !lateral.contains_key(&t.wall_id) {
            t.weight = 1.0 + (t.weight - 1.0) * p.decay;
        }
    }
    for (&wall_id, &(sum, n)) in &lateral {
        let mean = sum / n as f64;
        let side = if mean.abs() < p.ambiguous_m {
            None
        } else if mean > 0.0 {
            Some(Side::Left)
        } else {
            Some(Side::Right)
        };
        let Some(side) = side else { continue };
        match tracks.tracks.get_mut(&wall_id) {
            Some(t) => {
                let f = if t.expected_side == side { p.alpha_up } else { p.alpha_down };
                t.weight = (t.weight * f).clamp(p.w_min, p.w_max);
            }
            None => {
                tracks.tracks.insert(
                    wall_id,
                    WallTrack {
                        wall_id,
                        weight: 1.0,
                        expected_side: side,
                    },
                );
            }
        }
    }
}
