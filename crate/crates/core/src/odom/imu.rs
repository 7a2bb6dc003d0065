use crate::error::{Error, Result};
use crate::io::ImuSample;

/// Longest tolerated hole in the gyro stream, seconds.
pub const MAX_IMU_GAP: f64 = 0.1;

fn rate_at(samples: &[ImuSample], t: f64) -> f64 {
    let i = samples.partition_point(|s| s.timestamp_s < t);
    if i == 0 {
        return samples[0].yaw_rate_rad_s;
    }
    if i == samples.len() {
        return samples[i - 1].yaw_rate_rad_s;
    }
    let (a, b) = (samples[i - 1], samples[i]);
    let w = (t - a.timestamp_s) / (b.timestamp_s - a.timestamp_s);
    a.yaw_rate_rad_s + w * (b.yaw_rate_rad_s - a.yaw_rate_rad_s)
}

/// Trapezoidal integral of yaw rate over `[t0, t1]`, interpolating linearly
/// at the interval ends.
pub fn integrate_imu_yaw(samples: &[ImuSample], t0: f64, t1: f64) -> Result<f64> {
    if !(t0 < t1) {
        return Err(Error::contract("integration interval must have t0 < t1"));
    }
    let first = samples.first().ok_or(Error::ImuGap {
        gap: t1 - t0,
        at: t0,
    })?;
    let last = samples.last().expect("non-empty");
    if first.timestamp_s - t0 > MAX_IMU_GAP {
        return Err(Error::ImuGap {
            gap: first.timestamp_s - t0,
            at: t0,
        });
    }
    if t1 - last.timestamp_s > MAX_IMU_GAP {
        return Err(Error::ImuGap {
            gap: t1 - last.timestamp_s,
            at: t1,
        });
    }
    let lo = samples.partition_point(|s| s.timestamp_s <= t0);
    let hi = samples.partition_point(|s| s.timestamp_s < t1);
    let mut knots = Vec::with_capacity(hi.saturating_sub(lo) + 2);
    knots.push((t0, rate_at(samples, t0)));
    knots.extend(samples[lo..hi].iter().map(|s| (s.timestamp_s, s.yaw_rate_rad_s)));
    knots.push((t1, rate_at(samples, t1)));
    let mut total = 0.0;
    for w in knots.windows(2) {
        let dt = w[1].0 - w[0].0;
        if dt > MAX_IMU_GAP + 1e-12 {
            return Err(Error::ImuGap { gap: dt, at: w[0].0 });
        }
        total += 0.5 * dt * (w[0].1 + w[1].1);
    }
    Ok(total)
}
