use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen3, Mat3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructureKind {
    Line,
    Plane,
    Scatter,
}

/// Singular values of the mean-centered `n x 3` coordinate matrix, sorted
/// descending. Computed as square roots of the scatter-matrix eigenvalues.
pub fn svd_singular_values<T: Real>(points: &[[T; 3]]) -> Result<[T; 3]> {
    if points.len() < 3 {
        return Err(Error::contract(format!(
            "singular values need at least 3 points, got {}",
            points.len()
        )));
    }
    let n = T::from_count(points.len());
    let mut mean = [T::zero(); 3];
    for p in points {
        for k in 0..3 {
            mean[k] = mean[k] + p[k];
        }
    }
    let mean = mean.map(|v| v / n);
    let mut scatter = Mat3::<T>::zeros();
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for i in 0..3 {
            for j in i..3 {
                scatter[(i, j)] = scatter[(i, j)] + d[i] * d[j];
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            scatter[(i, j)] = scatter[(j, i)];
        }
    }
    let (vals, _) = sym_eigen3(&scatter);
    Ok(vals.map(|l| l.max(T::zero()).sqrt()))
}

/// Classifies a neighborhood from its sorted singular values.
///
/// `Line` when `s2/s1 <= line_ratio`, otherwise `Plane` when
/// `s3/s2 <= plane_ratio`, otherwise `Scatter`. Only ratios are used, so the
/// result is invariant to scaling all three values.
pub fn assess_structure<T: Real>(
    s1: T,
    s2: T,
    s3: T,
    line_ratio: T,
    plane_ratio: T,
) -> Result<StructureKind> {
    if !(s1 >= s2 && s2 >= s3 && s3 >= T::zero()) {
        return Err(Error::contract("singular values must be sorted and non-negative"));
    }
    if !(s1 > T::zero()) {
        return Err(Error::contract("all singular values are zero"));
    }
    if s2 / s1 <= line_ratio {
        return Ok(StructureKind::Line);
    }
    if s2 > T::zero() && s3 / s2 <= plane_ratio {
        return Ok(StructureKind::Plane);
    }
    Ok(StructureKind::Scatter)
}
