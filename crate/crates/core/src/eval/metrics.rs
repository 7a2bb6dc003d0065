use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::se2::Pose2;
use crate::types::{Mask, Trajectory};

/// Poses whose stamps differ by more than this are never paired.
pub const MATCH_TOLERANCE_S: f64 = 0.05;

/// Intersection over union of two binary channels; 1 when both are empty.
pub fn iou(pred: &Mask, gt: &Mask) -> Result<f64> {
    if !pred.same_shape(gt) {
        return Err(Error::contract(format!(
            "iou of {}x{} and {}x{} masks",
            pred.azimuth_bins, pred.range_bins, gt.azimuth_bins, gt.range_bins
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.cells().iter().zip(gt.cells()) {
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Mutual nearest-neighbour stamp pairs `(index in a, index in b)` within
/// the tolerance, in increasing time order. Symmetric in its arguments.
pub fn match_stamps<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>, tol: f64) -> Vec<(usize, usize)> {
    a.stamps()
        .iter()
        .enumerate()
        .filter_map(|(i, &t)| {
            let j = b.nearest(t, tol)?;
            (a.nearest(b.stamps()[j], tol) == Some(i)).then_some((i, j))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthDrift {
    pub length_m: f64,
    pub segments: usize,
    pub translation_pct: f64,
    pub rotation_deg_per_100m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftResult {
    /// Mean over all subsequences of every length.
    pub translation_error: f64,
    pub rotation_error: f64,
    pub per_length: Vec<LengthDrift>,
    pub matched: usize,
    /// Ground-truth poses without an estimate within the stamp tolerance.
    pub unmatched: usize,
}

/// `{start, start + step, ..., stop}`, the desk-scale default being 10:80:10.
pub fn length_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start > 0.0 && step > 0.0 && stop >= start) {
        return Err(Error::Invalid(format!("bad length range {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

pub fn kitti_lengths() -> Vec<f64> {
    (1..=8).map(|i| 100.0 * i as f64).collect()
}

pub fn desk_lengths() -> Vec<f64> {
    (1..=8).map(|i| 10.0 * i as f64).collect()
}

/// Relative-pose drift over every start pose and subsequence length,
/// measured along the ground-truth path.
pub fn kitti_drift<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>, lengths: &[f64]) -> Result<DriftResult> {
    if lengths.is_empty() || lengths.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::contract("drift lengths must be a non-empty list of positive values"));
    }
    let pairs = match_stamps(gt, est, MATCH_TOLERANCE_S);
    if pairs.is_empty() {
        return Err(Error::NoOverlap {
            tolerance: MATCH_TOLERANCE_S,
        });
    }
    let g: Vec<Pose2<f64>> = pairs.iter().map(|&(i, _)| gt.poses()[i].cast()).collect();
    let e: Vec<Pose2<f64>> = pairs.iter().map(|&(_, j)| est.poses()[j].cast()).collect();
    let mut dist = Vec::with_capacity(g.len());
    let mut acc = 0.0;
    for i in 0..g.len() {
        if i > 0 {
            acc += (g[i].x - g[i - 1].x).hypot(g[i].y - g[i - 1].y);
        }
        dist.push(acc);
    }
    let min_len = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let available = *dist.last().expect("non-empty");
    if available + 1e-9 * min_len < min_len {
        return Err(Error::TrajectoryTooShort {
            required: min_len,
            available,
        });
    }

    // per start: (length slot, t_err / L, r_err / L)
    let per_start: Vec<Vec<(usize, f64, f64)>> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for (k, &len) in lengths.iter().enumerate() {
                let target = dist[i] + len - 1e-9 * len;
                let j = i + dist[i..].partition_point(|&d| d < target);
                if j >= g.len() {
                    continue;
                }
                let dg = g[i].between(&g[j]);
                let de = e[i].between(&e[j]);
                let err = dg.between(&de);
                out.push((k, err.translation_norm() / len, err.theta.abs() / len));
            }
            out
        })
        .collect();

    let mut sums = vec![(0usize, 0.0, 0.0); lengths.len()];
    let (mut n, mut t_all, mut r_all) = (0usize, 0.0, 0.0);
    for (k, t, r) in per_start.into_iter().flatten() {
        sums[k].0 += 1;
        sums[k].1 += t;
        sums[k].2 += r;
        n += 1;
        t_all += t;
        r_all += r;
    }
    let to_pct = 100.0;
    let to_deg100 = 100.0 * 180.0 / std::f64::consts::PI;
    let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
    Ok(DriftResult {
        translation_error: mean(t_all, n) * to_pct,
        rotation_error: mean(r_all, n) * to_deg100,
        per_length: lengths
            .iter()
            .zip(&sums)
            .map(|(&length_m, &(c, t, r))| LengthDrift {
                length_m,
                segments: c,
                translation_pct: mean(t, c) * to_pct,
                rotation_deg_per_100m: mean(r, c) * to_deg100,
            })
            .collect(),
        matched: pairs.len(),
        unmatched: gt.len() - pairs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApeReport {
    pub ape_m: f64,
    pub max_m: f64,
    /// Error at the last matched pose.
    pub final_m: f64,
    pub matched: usize,
    pub unmatched_est: usize,
    pub unmatched_gt: usize,
}

/// Mean planar position error over matched stamps, no alignment.
pub fn ape<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>) -> Result<f64> {
    Ok(ape_report(est, gt)?.ape_m)
}

pub fn ape_report<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>) -> Result<ApeReport> {
    let pairs = match_stamps(est, gt, MATCH_TOLERANCE_S);
    if pairs.is_empty() {
        return Err(Error::NoOverlap {
            tolerance: MATCH_TOLERANCE_S,
        });
    }
    let errs: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| {
            let (a, b) = (est.poses()[i], gt.poses()[j]);
            (a.x - b.x).as_f64().hypot((a.y - b.y).as_f64())
        })
        .collect();
    Ok(ApeReport {
        ape_m: errs.iter().sum::<f64>() / errs.len() as f64,
        max_m: errs.iter().copied().fold(0.0, f64::max),
        final_m: *errs.last().expect("non-empty"),
        matched: pairs.len(),
        unmatched_est: est.len() - pairs.len(),
        unmatched_gt: gt.len() - pairs.len(),
    })
}
