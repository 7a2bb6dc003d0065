use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen3, Mat3};
use crate::odom::{LineMatch, LineProblem, OrientedSurfacePoint};
use crate::osmloc::osm::MapIndex;
use crate::osmloc::tracks::{WallMatch, WallTracks};
use crate::scalar::Real;
use crate::se2::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct MapRegParams<T> {
    /// Largest point-to-wall distance accepted as a match, meters.
    pub match_gate: T,
    /// Radians between a point's normal and the wall's outward normal.
    pub max_normal_angle: T,
    pub huber_delta: T,
    pub max_iterations: usize,
    pub step_tolerance: T,
    /// Corrections from fewer matches are not applied.
    pub min_matches: usize,
    /// Corrections whose information matrix is worse conditioned than this
    /// are not applied.
    pub max_condition: T,
}

impl<T: Real> Default for MapRegParams<T> {
    fn default() -> Self {
        Self {
            match_gate: T::lit(2.0),
            max_normal_angle: T::lit(30f64.to_radians()),
            huber_delta: T::lit(0.3),
            max_iterations: 30,
            step_tolerance: T::lit(1e-6),
            min_matches: 10,
            max_condition: T::lit(1e4),
        }
    }
}

impl<T: Real> MapRegParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.match_gate > T::zero()
            && self.max_normal_angle > T::zero()
            && self.huber_delta > T::zero()
            && self.max_iterations > 0
            && self.step_tolerance > T::zero()
            && self.max_condition > T::one();
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("map registration gates must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapRegistration<T> {
    /// Registered sensor pose in the map frame.
    pub pose: Pose2<T>,
    /// `prior⁻¹ ∘ pose`, expressed in the prior's body frame.
    pub correction: Pose2<T>,
    pub matches: Vec<WallMatch<T>>,
    pub iterations: usize,
    pub converged: bool,
    /// Weighted `Σ J Jᵀ` at the final pose, over `(x, y, theta)`.
    pub information: Mat3<T>,
    /// `λmax / λmin` of `information`; infinite when singular.
    pub condition: T,
    pub rank_deficient: bool,
    /// Enough matches and a well-conditioned information matrix.
    pub confident: bool,
    pub residual_rms: T,
}

impl<T: Real> MapRegistration<T> {
    /// Covariance of `pose`: `sigma² · information⁻¹` with the residual RMS
    /// floored at `min_sigma`. `None` when the information is singular.
    pub fn covariance(&self, min_sigma: T) -> Option<Mat3<T>> {
        let s = self.residual_rms.max(min_sigma);
        Some(self.information.inverse()?.scale(s * s).symmetrized())
    }
}

fn associate<T: Real>(
    points: &[OrientedSurfacePoint<T>],
    map: &MapIndex<T>,
    tracks: &WallTracks,
    pose: &Pose2<T>,
    params: &MapRegParams<T>,
) -> (Vec<LineMatch<T>>, Vec<WallMatch<T>>) {
    let min_cos = params.max_normal_angle.cos();
    let mut lines = Vec::new();
    let mut walls = Vec::new();
    for f in points {
        let p = pose.apply(f.mean);
        let n = pose.rotate(f.normal);
        let mut best: Option<(T, usize, [T; 2])> = None;
        for &i in map.candidates(p) {
            let s = &map.segments()[i];
            let on = s.outward_normal();
            if n[0] * on[0] + n[1] * on[1] < min_cos {
                continue;
            }
            let (q, d) = s.closest(p);
            if d > params.match_gate {
                continue;
            }
            if best.is_none_or(|(bd, bi, _)| d < bd || (d == bd && i < bi)) {
                best = Some((d, i, q));
            }
        }
        if let Some((_, i, q)) = best {
            let s = &map.segments()[i];
            let w = T::lit(tracks.weight(s.wall_id));
            let on = s.outward_normal();
            lines.push(LineMatch {
                src: f.mean,
                mean: s.a,
                normal: on,
                weight: w,
            });
            walls.push(WallMatch {
                wall_id: s.wall_id,
                point: p,
                projection: q,
                residual: on[0] * (p[0] - s.a[0]) + on[1] * (p[1] - s.a[1]),
                weight: w,
            });
        }
    }
    (lines, walls)
}

fn information<T: Real>(lines: &[LineMatch<T>], pose: &Pose2<T>, delta: T) -> Mat3<T> {
    let mut h = Mat3::zeros();
    for m in lines {
        let r = m.residual(pose).abs();
        let w = m.weight * if r <= delta { T::one() } else { delta / r };
        let j = m.jacobian(pose);
        for a in 0..3 {
            for b in 0..3 {
                h.0[a][b] = h.0[a][b] + w * j[a] * j[b];
            }
        }
    }
    h
}

/// Aligns building-class surface points (sensor frame) to the wall map,
/// starting from `prior`, with point weights scaled by their wall's track
/// weight. Directions the walls leave unconstrained stay at the prior.
pub fn register_to_map<T: Real>(
    points: &[OrientedSurfacePoint<T>],
    map: &MapIndex<T>,
    tracks: &WallTracks,
    prior: &Pose2<T>,
    params: &MapRegParams<T>,
) -> Result<MapRegistration<T>> {
    params.validate()?;
    if map.cell() < params.match_gate * T::lit(2.0) {
        return Err(Error::contract("map index cell must be at least twice the match gate"));
    }
    let mut pose = *prior;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..params.max_iterations {
        let (lines, _) = associate(points, map, tracks, &pose, params);
        if lines.len() < 3 {
            break;
        }
        iterations += 1;
        let problem = LineProblem {
            matches: lines,
            huber_delta: params.huber_delta,
            prior: None,
        };
        let (next, delta, _) = problem.step(&pose);
        pose = next;
        if (delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]).sqrt() < params.step_tolerance {
            converged = true;
            break;
        }
    }
    let (lines, matches) = associate(points, map, tracks, &pose, params);
    let info = information(&lines, &pose, params.huber_delta);
    let (vals, _) = sym_eigen3(&info);
    let condition = if vals[2] > T::zero() { vals[0] / vals[2] } else { T::infinity() };
    let rank_deficient = !(condition < params.max_condition);
    let residual_rms = if lines.is_empty() {
        T::zero()
    } else {
        let ss: T = lines.iter().map(|m| m.residual(&pose).powi(2)).sum();
        (ss / T::from_count(lines.len())).sqrt()
    };
    let enough = matches.len() >= params.min_matches;
    if !enough {
        pose = *prior;
    }
    Ok(MapRegistration {
        correction: prior.between(&pose),
        pose,
        confident: enough && !rank_deficient,
        matches,
        iterations,
        converged,
        information: info,
        condition,
        rank_deficient,
        residual_rms,
    })
}
