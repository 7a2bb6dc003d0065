use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen2;
use crate::scalar::Real;

/// Cell summary used for registration: centroid, unit surface normal and the
/// number of points behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedSurfacePoint<T> {
    pub mean: [T; 2],
    pub normal: [T; 2],
    pub weight: usize,
}

/// Cells whose covariance eigenvalue ratio is below this are too round to
/// carry a direction.
pub const MIN_EIGEN_RATIO: f64 = 1.5;

/// Groups points on a square grid and fits a surface normal per cell with at
/// least `min_cell_points` members. Normals point toward the sensor origin.
pub fn compute_osp<T: Real>(
    points: &[[T; 2]],
    cell_size: T,
    min_cell_points: usize,
) -> Result<Vec<OrientedSurfacePoint<T>>> {
    compute_osp_with_ratio(points, cell_size, min_cell_points, T::lit(MIN_EIGEN_RATIO))
}

/// As [`compute_osp`] with a custom minimum eigenvalue ratio (at least
/// [`MIN_EIGEN_RATIO`]).
pub fn compute_osp_with_ratio<T: Real>(
    points: &[[T; 2]],
    cell_size: T,
    min_cell_points: usize,
    min_ratio: T,
) -> Result<Vec<OrientedSurfacePoint<T>>> {
    if !(cell_size > T::zero()) {
        return Err(Error::contract("surface point cell size must be positive"));
    }
    let mut cells: BTreeMap<(i64, i64), Vec<[T; 2]>> = BTreeMap::new();
    for p in points {
        let key = (
            (p[0] / cell_size).floor().to_i64().unwrap_or(0),
            (p[1] / cell_size).floor().to_i64().unwrap_or(0),
        );
        cells.entry(key).or_default().push(*p);
    }
    let ratio = min_ratio.max(T::lit(MIN_EIGEN_RATIO));
    let mut out = Vec::new();
    for members in cells.values() {
        if members.len() < min_cell_points.max(2) {
            continue;
        }
        let n = T::from_count(members.len());
        let mut mean = [T::zero(); 2];
        for p in members {
            mean[0] = mean[0] + p[0];
            mean[1] = mean[1] + p[1];
        }
        mean = mean.map(|v| v / n);
        let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
        for p in members {
            let dx = p[0] - mean[0];
            let dy = p[1] - mean[1];
            sxx = sxx + dx * dx;
            sxy = sxy + dx * dy;
            syy = syy + dy * dy;
        }
        let (large, small, mut normal) = sym_eigen2(sxx / n, sxy / n, syy / n);
        if !(large > T::zero()) || large < ratio * small {
            continue;
        }
        if normal[0] * mean[0] + normal[1] * mean[1] > T::zero() {
            normal = [-normal[0], -normal[1]];
        }
        out.push(OrientedSurfacePoint {
            mean,
            normal,
            weight: members.len(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_normals() {
        let along_x: Vec<[f64; 2]> = (0..10).map(|i| [10.0 + 0.2 * i as f64, 0.0]).collect();
        let f = compute_osp(&along_x, 3.0, 4).unwrap();
        assert_eq!(f.len(), 1);
        assert!(f[0].normal[0].abs() < 1e-12 && (f[0].normal[1].abs() - 1.0).abs() < 1e-12);

        let along_y: Vec<[f64; 2]> = (0..10).map(|i| [3.0, 0.1 + 0.2 * i as f64]).collect();
        let f = compute_osp(&along_y, 3.0, 4).unwrap();
        assert_eq!(f.len(), 1);
        // oriented toward the origin
        assert!((f[0].normal[0] + 1.0).abs() < 1e-12 && f[0].normal[1].abs() < 1e-12);
        assert_eq!(f[0].weight, 10);
    }

    #[test]
    fn sparse_and_round_cells_are_skipped() {
        let few = vec![[1.0f64, 1.0], [1.5, 1.0], [2.0, 1.0]];
        assert!(compute_osp(&few, 3.0, 4).unwrap().is_empty());
        let square = vec![[0.5f64, 0.5], [2.5, 0.5], [0.5, 2.5], [2.5, 2.5], [1.5, 1.5]];
        assert!(compute_osp(&square, 3.0, 4).unwrap().is_empty());
        assert!(compute_osp(&square, 0.0, 4).is_err());
    }
}
