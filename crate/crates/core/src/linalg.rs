//! Small fixed-size linear algebra: 2x2/3x3 symmetric eigenproblems, 3x3
//! matrices for the filters and Gauss-Newton normal equations.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::scalar::Real;

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Real> Mat3<T> {
    pub fn zeros() -> Self {
        Mat3([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diag([T::one(); 3])
    }

    pub fn diag(d: [T; 3]) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn scale(&self, s: T) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|v| *v = *v * s);
        m
    }

    pub fn mul_vec(&self, v: [T; 3]) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        }
        out
    }

    pub fn determinant(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse by cofactors; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.determinant();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        Some(Mat3(adj).scale(T::one() / det))
    }

    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        let mut m = *self;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let v = (self.0[i][j] + self.0[j][i]) * half;
                m.0[i][j] = v;
                m.0[j][i] = v;
            }
        }
        m
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Mat3<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.0[r][c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat3<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.0[r][c]
    }
}

impl<T: Real> Add for Mat3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = m.0[i][j] + rhs.0[i][j];
            }
        }
        m
    }
}

impl<T: Real> Sub for Mat3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = m.0[i][j] - rhs.0[i][j];
            }
        }
        m
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        m
    }
}

/// Eigen-decomposition of a real symmetric 3x3 matrix by cyclic Jacobi
/// rotations. Eigenvalues are returned in descending order; column `k` of
/// the returned matrix is the unit eigenvector for eigenvalue `k`.
pub fn sym_eigen3<T: Real>(m: &Mat3<T>) -> ([T; 3], Mat3<T>) {
    let mut a = m.symmetrized();
    let mut v = Mat3::<T>::identity();
    let tiny = T::epsilon() * T::epsilon();

    for _sweep in 0..64 {
        let off = a[(0, 1)] * a[(0, 1)] + a[(0, 2)] * a[(0, 2)] + a[(1, 2)] * a[(1, 2)];
        let diag = a[(0, 0)] * a[(0, 0)] + a[(1, 1)] * a[(1, 1)] + a[(2, 2)] * a[(2, 2)];
        if off <= tiny * diag || off == T::zero() {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == T::zero() {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            // A <- J^T A J
            for k in 0..3 {
                let akp = a[(k, p)];
                let akq = a[(k, q)];
                a[(k, p)] = c * akp - s * akq;
                a[(k, q)] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[(p, k)];
                let aqk = a[(q, k)];
                a[(p, k)] = c * apk - s * aqk;
                a[(q, k)] = s * apk + c * aqk;
            }
            for k in 0..3 {
                let vkp = v[(k, p)];
                let vkq = v[(k, q)];
                v[(k, p)] = c * vkp - s * vkq;
                v[(k, q)] = s * vkp + c * vkq;
            }
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let mut vals = [T::zero(); 3];
    let mut vecs = Mat3::zeros();
    for (dst, &src) in order.iter().enumerate() {
        vals[dst] = a[(src, src)];
        for k in 0..3 {
            vecs[(k, dst)] = v[(k, src)];
        }
    }
    (vals, vecs)
}

/// Eigen-decomposition of `[[a, b], [b, c]]`.
///
/// Returns `(large, small)` eigenvalues and the unit eigenvector of the
/// smaller one.
pub fn sym_eigen2<T: Real>(a: T, b: T, c: T) -> (T, T, [T; 2]) {
    let half = T::lit(0.5);
    let mean = (a + c) * half;
    let diff = (a - c) * half;
    let rad = (diff * diff + b * b).sqrt();
    let large = mean + rad;
    let small = mean - rad;
    // eigenvector of the small eigenvalue: angle of the principal axis + 90 deg
    let phi = half * (T::lit(2.0) * b).atan2(a - c);
    let normal = [-phi.sin(), phi.cos()];
    (large, small, normal)
}

/// Solves `A x = b` for symmetric positive-definite `A` through its
/// eigen-decomposition, discarding directions whose eigenvalue is below
/// `rel_floor * lambda_max`.
///
/// Returns the solution and the number of directions that were dropped.
pub fn solve_sym_truncated<T: Real>(a: &Mat3<T>, b: [T; 3], rel_floor: T) -> ([T; 3], usize) {
    let (vals, vecs) = sym_eigen3(a);
    let lmax = vals[0].max(T::zero());
    let mut x = [T::zero(); 3];
    let mut dropped = 0;
    if lmax <= T::zero() {
        return (x, 3);
    }
    for k in 0..3 {
        if vals[k] <= rel_floor * lmax {
            dropped += 1;
            continue;
        }
        let u = [vecs[(0, k)], vecs[(1, k)], vecs[(2, k)]];
        let proj = (u[0] * b[0] + u[1] * b[1] + u[2] * b[2]) / vals[k];
        for i in 0..3 {
            x[i] = x[i] + proj * u[i];
        }
    }
    (x, dropped)
}
