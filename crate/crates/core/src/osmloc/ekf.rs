use crate::error::{Error, Result};
use crate::linalg::{sym_eigen3, Mat3};
use crate::scalar::{normalize_angle, Real};
use crate::se2::Pose2;

/// Map-frame pose estimate with its `(x, y, theta)` covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocState<T> {
    pub mean: Pose2<T>,
    pub cov: Mat3<T>,
}

const SYM_TOL: f64 = 1e-9;

/// Symmetric to 1e-9 (relative to the largest entry when above 1) with no
/// eigenvalue below `-1e-9` on the same scale.
pub fn check_psd<T: Real>(m: &Mat3<T>, what: &str) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::contract(format!("{what} covariance is not finite")));
    }
    let scale = m.0.iter().flatten().fold(1.0f64, |a, v| a.max(v.as_f64().abs()));
    if m.max_asymmetry().as_f64() > SYM_TOL * scale {
        return Err(Error::contract(format!("{what} covariance is not symmetric")));
    }
    let (vals, _) = sym_eigen3(&m.symmetrized());
    if vals[2].as_f64() < -SYM_TOL * scale {
        return Err(Error::contract(format!(
            "{what} covariance is not positive semi-definite (eigenvalue {:e})",
            vals[2].as_f64()
        )));
    }
    Ok(())
}

impl<T: Real> LocState<T> {
    pub fn new(mean: Pose2<T>, cov: Mat3<T>) -> Result<Self> {
        check_psd(&cov, "state")?;
        Ok(Self { mean, cov })
    }
}

/// Propagates the state through the body-frame motion `delta` whose
/// covariance is `q`: `P' = F P Fᵀ + G Q Gᵀ`.
pub fn ekf_predict<T: Real>(state: &LocState<T>, delta: &Pose2<T>, q: &Mat3<T>) -> Result<LocState<T>> {
    check_psd(&state.cov, "state")?;
    check_psd(q, "motion")?;
    let (s, c) = state.mean.theta.sin_cos();
    let (dx, dy) = (delta.x, delta.y);
    let z = T::zero();
    let o = T::one();
    let f = Mat3([[o, z, -s * dx - c * dy], [z, o, c * dx - s * dy], [z, z, o]]);
    let g = Mat3([[c, -s, z], [s, c, z], [z, z, o]]);
    let cov = (f * state.cov * f.transpose() + g * *q * g.transpose()).symmetrized();
    Ok(LocState {
        mean: state.mean.compose(delta),
        cov,
    })
}

/// Kalman update with a direct measurement `z` of the pose (covariance `r`),
/// Joseph form. The heading innovation is wrapped to (-pi, pi].
pub fn ekf_update<T: Real>(state: &LocState<T>, z: &Pose2<T>, r: &Mat3<T>) -> Result<LocState<T>> {
    check_psd(&state.cov, "state")?;
    check_psd(r, "measurement")?;
    let s = state.cov + *r;
    let s_inv = s
        .inverse()
        .ok_or_else(|| Error::contract("innovation covariance is singular"))?;
    let k = state.cov * s_inv;
    let y = [
        z.x - state.mean.x,
        z.y - state.mean.y,
        normalize_angle(z.theta - state.mean.theta),
    ];
    let d = k.mul_vec(y);
    let mean = Pose2::new(
        state.mean.x + d[0],
        state.mean.y + d[1],
        normalize_angle(state.mean.theta + d[2]),
    );
    let ik = Mat3::identity() - k;
    let cov = (ik * state.cov * ik.transpose() + k * *r * k.transpose()).symmetrized();
    check_psd(&cov, "posterior")?;
    Ok(LocState { mean, cov })
}

/// One filter cycle: predict with the odometry increment, then, if given,
/// fuse a map correction. `correction` is relative to the predicted mean
/// (as returned by map registration) with its map-frame covariance.
pub fn ekf_step<T: Real>(
    state: &LocState<T>,
    odom_delta: &Pose2<T>,
    odom_cov: &Mat3<T>,
    correction: Option<(&Pose2<T>, &Mat3<T>)>,
) -> Result<LocState<T>> {
    let predicted = ekf_predict(state, odom_delta, odom_cov)?;
    match correction {
        Some((c, r)) => ekf_update(&predicted, &predicted.mean.compose(c), r),
        None => Ok(predicted),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};

    fn state(cov: [f64; 3]) -> LocState<f64> {
        LocState::new(Pose2::new(2.0, -1.0, 0.4), Mat3::diag(cov)).unwrap()
    }

    #[test]
    fn zero_delta_grows_covariance_only() {
        let s = state([0.1, 0.2, 0.01]);
        let q = Mat3::diag([0.01, 0.01, 0.001]);
        let out = ekf_step(&s, &Pose2::identity(), &q, None).unwrap();
        assert_eq!(out.mean, s.mean);
        // G is a rotation; with isotropic xy noise the growth stays diagonal
        for i in 0..3 {
            assert!((out.cov.0[i][i] - s.cov.0[i][i] - q.0[i][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn near_perfect_correction_wins() {
        let s = state([1.0, 1.0, 0.1]);
        let c = Pose2::new(0.5, -0.3, 0.05);
        let out = ekf_step(&s, &Pose2::identity(), &Mat3::zeros(), Some((&c, &Mat3::diag([1e-12; 3])))).unwrap();
        let target = s.mean.compose(&c);
        assert!((out.mean.x - target.x).abs() < 1e-9);
        assert!((out.mean.y - target.y).abs() < 1e-9);
        assert!((out.mean.theta - target.theta).abs() < 1e-9);
    }

    #[test]
    fn scalar_analogue_halves_variance() {
        let s = state([1.0, 1.0, 1.0]);
        let out = ekf_update(&s, &Pose2::new(3.0, -1.0, 0.4), &Mat3::diag([1.0, 1.0, 1.0])).unwrap();
        assert!((out.cov.0[0][0] - 0.5).abs() < 1e-12);
        assert!((out.mean.x - 2.5).abs() < 1e-12);
    }

    #[test]
    fn heading_innovation_wraps() {
        let s: LocState<f64> = LocState::new(Pose2::new(0.0, 0.0, 3.1), Mat3::identity()).unwrap();
        let out = ekf_update(&s, &Pose2::new(0.0, 0.0, -3.1), &Mat3::identity()).unwrap();
        // halfway across the +-pi seam, not through zero
        assert!(out.mean.theta.abs() > 3.1);
    }

    #[test]
    fn rejects_non_psd() {
        let bad = Mat3::diag([1.0, -0.5, 1.0]);
        assert!(matches!(LocState::new(Pose2::identity(), bad), Err(Error::Contract(_))));
        let s = state([1.0, 1.0, 1.0]);
        assert!(ekf_predict(&s, &Pose2::identity(), &bad).is_err());
        let mut asym = Mat3::identity();
        asym.0[0][1] = 0.1;
        assert!(ekf_update(&s, &Pose2::identity(), &asym).is_err());
    }

    #[test]
    fn predict_matches_nalgebra() {
        let s = LocState::new(Pose2::new(1.0, 2.0, 0.7), Mat3([[0.3, 0.05, 0.01], [0.05, 0.2, -0.02], [0.01, -0.02, 0.05]])).unwrap();
        let d = Pose2::new(1.5, 0.2, 0.1);
        let q = Mat3::diag([0.02, 0.01, 0.003]);
        let out = ekf_predict(&s, &d, &q).unwrap();
        // numeric Jacobians of the composition
        let f = |m: Vector3<f64>, dd: Vector3<f64>| {
            let p = Pose2::new(m[0], m[1], m[2]).compose(&Pose2::new(dd[0], dd[1], dd[2]));
            Vector3::new(p.x, p.y, p.theta)
        };
        let m0 = Vector3::new(1.0, 2.0, 0.7);
        let d0 = Vector3::new(1.5, 0.2, 0.1);
        let h = 1e-6;
        let mut fm = Matrix3::zeros();
        let mut gm = Matrix3::zeros();
        for i in 0..3 {
            let mut e = Vector3::zeros();
            e[i] = h;
            fm.set_column(i, &((f(m0 + e, d0) - f(m0 - e, d0)) / (2.0 * h)));
            gm.set_column(i, &((f(m0, d0 + e) - f(m0, d0 - e)) / (2.0 * h)));
        }
        let p = Matrix3::from_fn(|i, j| s.cov.0[i][j]);
        let qm = Matrix3::from_fn(|i, j| q.0[i][j]);
        let want = fm * p * fm.transpose() + gm * qm * gm.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!((out.cov.0[i][j] - want[(i, j)]).abs() < 1e-8);
            }
        }
    }
}
