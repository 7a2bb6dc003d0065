use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_sym_truncated, Mat3};
use crate::odom::osp::OrientedSurfacePoint;
use crate::scalar::{normalize_angle, Real};
use crate::se2::Pose2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe<T> {
    pub pose: Pose2<T>,
    /// Features in the keyframe's own sensor frame.
    pub features: Vec<OrientedSurfacePoint<T>>,
}

/// Sliding window of the most recent keyframes, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeBuffer<T> {
    capacity: usize,
    frames: VecDeque<Keyframe<T>>,
}

impl<T: Real> KeyframeBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::contract("keyframe buffer needs capacity >= 1"));
        }
        Ok(Self {
            capacity,
            frames: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn push(&mut self, keyframe: Keyframe<T>) {
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(keyframe);
    }

    pub fn frames(&self) -> impl Iterator<Item = &Keyframe<T>> {
        self.frames.iter()
    }

    pub fn latest(&self) -> Option<&Keyframe<T>> {
        self.frames.back()
    }

    /// Applies `g` on the left of every keyframe pose.
    pub fn transformed(&self, g: &Pose2<T>) -> Self {
        let mut out = self.clone();
        for kf in out.frames.iter_mut() {
            kf.pose = g.compose(&kf.pose);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct RegisterParams<T> {
    pub huber_delta: T,
    pub match_gate: T,
    /// Largest angle between source and target normals for a valid match.
    pub max_normal_angle: T,
    pub max_iterations: usize,
    pub step_tolerance: T,
    pub min_matches: usize,
    pub weighting: MatchWeighting,
}

impl<T: Real> Default for RegisterParams<T> {
    fn default() -> Self {
        Self {
            huber_delta: T::lit(0.1),
            match_gate: T::lit(2.0),
            max_normal_angle: T::lit(45f64.to_radians()),
            max_iterations: 50,
            step_tolerance: T::lit(1e-6),
            min_matches: 3,
            weighting: MatchWeighting::Uniform,
        }
    }
}

impl<T: Real> RegisterParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = self.huber_delta > T::zero()
            && self.match_gate > T::zero()
            && self.max_normal_angle > T::zero()
            && self.step_tolerance > T::zero();
        if !positive || self.max_iterations == 0 {
            return Err(Error::Invalid("registration parameters must be positive".into()));
        }
        Ok(())
    }
}

/// How a correspondence is weighted from the point counts of its two cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchWeighting {
    #[default]
    Uniform,
    /// Geometric mean of the source and target counts.
    Counts,
}

fn match_weight<T: Real>(w: MatchWeighting, src: usize, tgt: usize) -> T {
    match w {
        MatchWeighting::Uniform => T::one(),
        MatchWeighting::Counts => T::from_count(src * tgt).sqrt(),
    }
}

/// Soft prior pulling the heading toward `theta` with quadratic weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawPrior<T> {
    pub theta: T,
    pub weight: T,
}

/// One point-to-line correspondence: source feature in its own frame, target
/// line in the odometry frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMatch<T> {
    pub src: [T; 2],
    pub mean: [T; 2],
    pub normal: [T; 2],
    pub weight: T,
}

impl<T: Real> LineMatch<T> {
    pub fn residual(&self, pose: &Pose2<T>) -> T {
        let p = pose.apply(self.src);
        self.normal[0] * (p[0] - self.mean[0]) + self.normal[1] * (p[1] - self.mean[1])
    }

    /// Derivative of the residual with respect to `(x, y, theta)`.
    pub fn jacobian(&self, pose: &Pose2<T>) -> [T; 3] {
        let (s, c) = pose.theta.sin_cos();
        let [px, py] = self.src;
        let dx = -s * px - c * py;
        let dy = c * px - s * py;
        [self.normal[0], self.normal[1], self.normal[0] * dx + self.normal[1] * dy]
    }
}

pub fn huber<T: Real>(r: T, delta: T) -> T {
    let a = r.abs();
    if a <= delta {
        T::lit(0.5) * r * r
    } else {
        delta * (a - T::lit(0.5) * delta)
    }
}

/// Robust objective for a fixed set of correspondences.
#[derive(Debug, Clone)]
pub struct LineProblem<T> {
    pub matches: Vec<LineMatch<T>>,
    pub huber_delta: T,
    pub prior: Option<YawPrior<T>>,
}

impl<T: Real> LineProblem<T> {
    pub fn cost(&self, pose: &Pose2<T>) -> T {
        let mut c: T = self
            .matches
            .iter()
            .map(|m| m.weight * huber(m.residual(pose), self.huber_delta))
            .sum();
        if let Some(p) = self.prior {
            let e = normalize_angle(pose.theta - p.theta);
            c = c + T::lit(0.5) * p.weight * e * e;
        }
        c
    }

    /// Iteratively reweighted Gauss-Newton step with halving. Returns the
    /// accepted pose, the applied step and whether the cost decreased or
    /// stayed equal.
    pub fn step(&self, pose: &Pose2<T>) -> (Pose2<T>, [T; 3], bool) {
        let mut h = Mat3::zeros();
        let mut g = [T::zero(); 3];
        for m in &self.matches {
            let r = m.residual(pose);
            let j = m.jacobian(pose);
            let a = r.abs();
            let irls = if a <= self.huber_delta { T::one() } else { self.huber_delta / a };
            let w = m.weight * irls;
            for i in 0..3 {
                g[i] = g[i] + w * j[i] * r;
                for k in 0..3 {
                    h.0[i][k] = h.0[i][k] + w * j[i] * j[k];
                }
            }
        }
        if let Some(p) = self.prior {
            let e = normalize_angle(pose.theta - p.theta);
            h.0[2][2] = h.0[2][2] + p.weight;
            g[2] = g[2] + p.weight * e;
        }
        let (x, _) = solve_sym_truncated(&h, g, T::lit(1e-9));
        let mut delta = x.map(|v| -v);
        let base = self.cost(pose);
        for _ in 0..30 {
            let cand = Pose2::new(pose.x + delta[0], pose.y + delta[1], pose.theta + delta[2]);
            if self.cost(&cand) <= base {
                return (cand, delta, true);
            }
            delta = delta.map(|v| v * T::lit(0.5));
        }
        (*pose, [T::zero(); 3], false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registration<T> {
    pub pose: Pose2<T>,
    pub converged: bool,
    /// Fewer than the minimum number of matches: pose is the guess.
    pub diverged: bool,
    /// RMS point-to-line distance over the final matches, meters.
    pub residual: T,
    pub matches: usize,
    /// Final matches with a residual inside the Huber threshold.
    pub inliers: usize,
    pub iterations: usize,
    /// `(before, after)` objective per accepted iteration, evaluated on the
    /// correspondences of that iteration.
    pub cost_trace: Vec<(T, T)>,
}

struct TargetIndex<T> {
    cell: T,
    feats: Vec<(usize, [T; 2], [T; 2], usize)>,
    grid: HashMap<(i64, i64), Vec<usize>>,
    keyframes: usize,
}

impl<T: Real> TargetIndex<T> {
    fn new(buffer: &KeyframeBuffer<T>, cell: T) -> Self {
        let mut feats = Vec::new();
        for (k, kf) in buffer.frames().enumerate() {
            for f in &kf.features {
                feats.push((k, kf.pose.apply(f.mean), kf.pose.rotate(f.normal), f.weight));
            }
        }
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, f) in feats.iter().enumerate() {
            grid.entry(Self::key(f.1, cell)).or_default().push(i);
        }
        Self {
            cell,
            feats,
            grid,
            keyframes: buffer.len(),
        }
    }

    fn key(p: [T; 2], cell: T) -> (i64, i64) {
        (
            (p[0] / cell).floor().to_i64().unwrap_or(i64::MAX),
            (p[1] / cell).floor().to_i64().unwrap_or(i64::MAX),
        )
    }

    /// Nearest compatible target per keyframe within the gate.
    fn associate(&self, src: &[OrientedSurfacePoint<T>], pose: &Pose2<T>, params: &RegisterParams<T>) -> Vec<LineMatch<T>> {
        let gate2 = params.match_gate * params.match_gate;
        let min_cos = params.max_normal_angle.cos();
        let mut out = Vec::new();
        let mut best: Vec<Option<(T, usize)>> = vec![None; self.keyframes];
        for s in src {
            let p = pose.apply(s.mean);
            let n = pose.rotate(s.normal);
            best.iter_mut().for_each(|b| *b = None);
            let (cx, cy) = Self::key(p, self.cell);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(bucket) = self.grid.get(&(cx.saturating_add(dx), cy.saturating_add(dy))) else {
                        continue;
                    };
                    for &i in bucket {
                        let (k, m, tn, _) = self.feats[i];
                        let d2 = (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2);
                        if d2 > gate2 || n[0] * tn[0] + n[1] * tn[1] < min_cos {
                            continue;
                        }
                        let better = match best[k] {
                            None => true,
                            Some((bd, bi)) => d2 < bd || (d2 == bd && i < bi),
                        };
                        if better {
                            best[k] = Some((d2, i));
                        }
                    }
                }
            }
            for &(_, i) in best.iter().flatten() {
                let (_, mean, normal, count) = self.feats[i];
                out.push(LineMatch {
                    src: s.mean,
                    mean,
                    normal,
                    weight: match_weight(params.weighting, s.weight, count),
                });
            }
        }
        out
    }
}

/// Aligns `src` (sensor frame) to the keyframes in `buffer` (odometry frame)
/// starting from `guess`, re-associating at every iteration.
pub fn register<T: Real>(
    src: &[OrientedSurfacePoint<T>],
    buffer: &KeyframeBuffer<T>,
    guess: Pose2<T>,
    params: &RegisterParams<T>,
    prior: Option<YawPrior<T>>,
) -> Result<Registration<T>> {
    if src.is_empty() || buffer.is_empty() {
        return Err(Error::contract("registration needs source features and at least one keyframe"));
    }
    params.validate()?;
    let index = TargetIndex::new(buffer, params.match_gate);
    let mut pose = guess;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..params.max_iterations {
        let matches = index.associate(src, &pose, params);
        if matches.len() < params.min_matches {
            if iterations == 0 {
                return Ok(Registration {
                    pose: guess,
                    converged: false,
                    diverged: true,
                    residual: T::zero(),
                    matches: matches.len(),
                    inliers: 0,
                    iterations: 0,
                    cost_trace: trace,
                });
            }
            break;
        }
        iterations += 1;
        let problem = LineProblem {
            matches,
            huber_delta: params.huber_delta,
            prior,
        };
        let before = problem.cost(&pose);
        let (next, delta, accepted) = problem.step(&pose);
        if accepted {
            trace.push((before, problem.cost(&next)));
        }
        pose = next;
        let norm = (delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]).sqrt();
        if norm < params.step_tolerance {
            converged = true;
            break;
        }
    }
    let final_matches = index.associate(src, &pose, params);
    let inliers = final_matches
        .iter()
        .filter(|m| m.residual(&pose).abs() <= params.huber_delta)
        .count();
    let residual = if final_matches.is_empty() {
        T::zero()
    } else {
        let ss: T = final_matches.iter().map(|m| m.residual(&pose).powi(2)).sum();
        (ss / T::from_count(final_matches.len())).sqrt()
    };
    Ok(Registration {
        pose,
        converged,
        diverged: final_matches.len() < params.min_matches,
        residual,
        matches: final_matches.len(),
        inliers,
        iterations,
        cost_trace: trace,
    })
}

/// Runs [`register`] from every guess and keeps the result with the most
/// inliers, ties broken by the lower residual, then by guess order.
pub fn register_multistart<T: Real>(
    src: &[OrientedSurfacePoint<T>],
    buffer: &KeyframeBuffer<T>,
    guesses: &[Pose2<T>],
    params: &RegisterParams<T>,
    prior: Option<YawPrior<T>>,
) -> Result<Registration<T>> {
    let mut best: Option<Registration<T>> = None;
    for &g in guesses {
        let r = register(src, buffer, g, params, prior)?;
        let better = match &best {
            None => true,
            Some(b) if b.diverged => !r.diverged,
            Some(b) => !r.diverged && (r.inliers > b.inliers || (r.inliers == b.inliers && r.residual < b.residual)),
        };
        if better {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::contract("multistart registration needs at least one guess"))
}
