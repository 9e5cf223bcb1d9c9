//! Loosely-coupled EKF that propagates with the vehicle IMU and corrects with visual
//! odometry, raising the pose rate from the camera rate to the IMU rate.
//!
//! State layout: `p(3) v(3) roll pitch yaw accel_bias(3)`, with the bias in the body
//! frame. The filter works directly on Euler angles, which is adequate inside the
//! +-30 degree attitude envelope. Gyro bias is not modelled.

use std::collections::VecDeque;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{euler_rates_from_body_rates, rotation_from_euler, EulerAngles, Vec3};
use crate::kalman::{joseph_update, symmetrize, UpdateOutcome};
use crate::scalar::wrap_angle;
use crate::timesync::ImuSample;

pub const FUSION_DIM: usize = 12;

pub type FusionVector = SVector<f64, FUSION_DIM>;
pub type FusionMatrix = SMatrix<f64, FUSION_DIM, FUSION_DIM>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionNoise {
    pub position_psd: f64,
    /// Accelerometer white noise, (m/s^2)^2/s.
    pub accel_psd: f64,
    /// Gyro white noise, (rad/s)^2/s.
    pub gyro_psd: f64,
    /// Accelerometer bias random walk, (m/s^2)^2/s.
    pub bias_psd: f64,
}

impl Default for FusionNoise {
    fn default() -> Self {
        Self {
            position_psd: 1e-6,
            accel_psd: 1e-2,
            gyro_psd: 1e-4,
            bias_psd: 1e-4,
        }
    }
}

impl FusionNoise {
    pub fn validate(&self) -> Result<()> {
        let all = [self.position_psd, self.accel_psd, self.gyro_psd, self.bias_psd];
        if all.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("fusion noise terms must be non-negative".into()))
        }
    }

    fn process(&self) -> FusionMatrix {
        let mut d = FusionVector::zeros();
        for i in 0..3 {
            d[i] = self.position_psd;
            d[3 + i] = self.accel_psd;
            d[6 + i] = self.gyro_psd;
            d[9 + i] = self.bias_psd;
        }
        FusionMatrix::from_diagonal(&d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusedState {
    pub mean: FusionVector,
    pub covariance: FusionMatrix,
    pub stamp: f64,
}

impl FusedState {
    pub fn new(
        p: Vec3<f64>,
        v: Vec3<f64>,
        attitude: EulerAngles<f64>,
        sigma: f64,
        sigma_bias: f64,
        stamp: f64,
    ) -> Self {
        let mut mean = FusionVector::zeros();
        mean.fixed_rows_mut::<3>(0).copy_from_slice(&p.to_array());
        mean.fixed_rows_mut::<3>(3).copy_from_slice(&v.to_array());
        mean.fixed_rows_mut::<3>(6)
            .copy_from_slice(&attitude.to_vec3().to_array());
        let mut d = FusionVector::from_element(sigma * sigma);
        for i in 9..12 {
            d[i] = sigma_bias * sigma_bias;
        }
        Self {
            mean,
            covariance: FusionMatrix::from_diagonal(&d),
            stamp,
        }
    }

    pub fn position(&self) -> Vec3<f64> {
        Vec3::new(self.mean[0], self.mean[1], self.mean[2])
    }

    pub fn velocity(&self) -> Vec3<f64> {
        Vec3::new(self.mean[3], self.mean[4], self.mean[5])
    }

    pub fn attitude(&self) -> EulerAngles<f64> {
        EulerAngles::new(self.mean[6], self.mean[7], self.mean[8])
    }

    pub fn accel_bias(&self) -> Vec3<f64> {
        Vec3::new(self.mean[9], self.mean[10], self.mean[11])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdometryMeasurement {
    pub p: Vec3<f64>,
    pub attitude: EulerAngles<f64>,
    pub v: Vec3<f64>,
    pub stamp: f64,
    pub position_var: f64,
    pub attitude_var: f64,
    pub velocity_var: f64,
}

impl OdometryMeasurement {
    pub fn validate(&self) -> Result<()> {
        let finite = self.p.is_finite() && self.v.is_finite() && self.attitude.is_finite() && self.stamp.is_finite();
        let vars = [self.position_var, self.attitude_var, self.velocity_var];
        if !finite || vars.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(
                "odometry must be finite with positive variances".into(),
            ));
        }
        Ok(())
    }
}

fn na(v: Vec3<f64>) -> Vector3<f64> {
    Vector3::new(v.x, v.y, v.z)
}

fn rot(a: &EulerAngles<f64>) -> Matrix3<f64> {
    let r = rotation_from_euler(a).rows();
    Matrix3::from_fn(|i, j| r[i][j])
}

/// Partial derivatives of `R(roll, pitch, yaw)` with respect to each angle.
fn rot_partials(a: &EulerAngles<f64>) -> [Matrix3<f64>; 3] {
    let rx = rot(&EulerAngles::new(a.roll, 0.0, 0.0));
    let ry = rot(&EulerAngles::new(0.0, a.pitch, 0.0));
    let rz = rot(&EulerAngles::new(0.0, 0.0, a.yaw));
    #[rustfmt::skip]
    let gx = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
    #[rustfmt::skip]
    let gy = Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0);
    #[rustfmt::skip]
    let gz = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    [rz * ry * rx * gx, rz * ry * gy * rx, gz * rz * ry * rx]
}

/// Partials of the Euler-rate map `E(roll, pitch) w` with respect to roll and pitch.
fn euler_rate_partials(a: &EulerAngles<f64>, w: Vector3<f64>) -> Matrix3<f64> {
    let (sr, cr) = a.roll.sin_cos();
    let (tp, cp) = (a.pitch.tan(), a.pitch.cos());
    #[rustfmt::skip]
    let d_roll = Matrix3::new(
        0.0, cr * tp, -sr * tp,
        0.0, -sr, -cr,
        0.0, cr / cp, -sr / cp,
    ) * w;
    #[rustfmt::skip]
    let d_pitch = Matrix3::new(
        0.0, sr / (cp * cp), cr / (cp * cp),
        0.0, 0.0, 0.0,
        0.0, sr * tp / cp, cr * tp / cp,
    ) * w;
    let mut m = Matrix3::zeros();
    m.set_column(0, &d_roll);
    m.set_column(1, &d_pitch);
    m
}

/// Strapdown propagation to the IMU stamp. One call per IMU sample.
pub fn fusion_propagate(s: &FusedState, imu: &ImuSample, gravity: f64, noise: &FusionNoise) -> Result<FusedState> {
    let dt = imu.stamp - s.stamp;
    if !(dt >= 0.0) {
        return Err(Error::OutOfOrder {
            stamp: imu.stamp,
            last: s.stamp,
        });
    }
    if !imu.gyro.is_finite() || !imu.accel.is_finite() {
        return Err(Error::InvalidInput(format!(
            "IMU sample at {} is not finite",
            imu.stamp
        )));
    }
    let att = s.attitude();
    let r = rot(&att);
    let f = na(imu.accel) - na(s.accel_bias());
    let a_w = r * f - Vector3::new(0.0, 0.0, gravity);
    let w = na(imu.gyro);
    let rates = na(euler_rates_from_body_rates(&att, imu.gyro));

    let mut mean = s.mean;
    let p = mean.fixed_rows::<3>(0) + mean.fixed_rows::<3>(3) * dt + a_w * (0.5 * dt * dt);
    let v = mean.fixed_rows::<3>(3) + a_w * dt;
    let e = mean.fixed_rows::<3>(6) + rates * dt;
    mean.fixed_rows_mut::<3>(0).copy_from(&p);
    mean.fixed_rows_mut::<3>(3).copy_from(&v);
    mean.fixed_rows_mut::<3>(6).copy_from(&e);
    mean[8] = wrap_angle(mean[8]);

    let mut a = FusionMatrix::zeros();
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    let dr = rot_partials(&att);
    for (k, d) in dr.iter().enumerate() {
        a.fixed_view_mut::<3, 1>(3, 6 + k).copy_from(&(d * f));
    }
    a.fixed_view_mut::<3, 3>(3, 9).copy_from(&(-r));
    a.fixed_view_mut::<3, 3>(6, 6).copy_from(&euler_rate_partials(&att, w));
    let phi = FusionMatrix::identity() + a * dt;
    let covariance = symmetrize(&(phi * s.covariance * phi.transpose() + noise.process() * dt));
    Ok(FusedState {
        mean,
        covariance,
        stamp: imu.stamp,
    })
}

/// EKF correction with odometry pose and velocity.
///
/// A measurement stamped away from the filter time is moved to the filter time along
/// its own velocity before the update.
pub fn fusion_update(s: &FusedState, z: &OdometryMeasurement) -> Result<FusedState> {
    z.validate()?;
    let shift = s.stamp - z.stamp;
    let zp = z.p + z.v * shift;
    let mut h = SMatrix::<f64, 9, FUSION_DIM>::zeros();
    for i in 0..9 {
        h[(i, i)] = 1.0;
    }
    let att = s.attitude();
    let innovation = SVector::<f64, 9>::from_column_slice(&[
        zp.x - s.mean[0],
        zp.y - s.mean[1],
        zp.z - s.mean[2],
        z.v.x - s.mean[3],
        z.v.y - s.mean[4],
        z.v.z - s.mean[5],
        wrap_angle(z.attitude.roll - att.roll),
        wrap_angle(z.attitude.pitch - att.pitch),
        wrap_angle(z.attitude.yaw - att.yaw),
    ]);
    let mut d = SVector::<f64, 9>::zeros();
    for i in 0..3 {
        d[i] = z.position_var;
        d[3 + i] = z.velocity_var;
        d[6 + i] = z.attitude_var;
    }
    let mut out = *s;
    let outcome = joseph_update(
        &mut out.mean,
        &mut out.covariance,
        &h,
        &SMatrix::from_diagonal(&d),
        &innovation,
        f64::INFINITY,
    );
    if outcome == UpdateOutcome::Gated {
        return Err(Error::Numerical {
            time: s.stamp,
            reason: "singular innovation covariance".into(),
            dump: String::new(),
        });
    }
    out.mean[8] = wrap_angle(out.mean[8]);
    Ok(out)
}

/// Propagated means kept for delayed measurements, s.
const HISTORY_SECONDS: f64 = 1.0;

/// Stateful filter holding its noise model and gravity.
///
/// Keeps a short history of the mean so that a delayed measurement is compared
/// with the estimate at its own stamp. The correction is still applied now.
#[derive(Clone, Debug)]
pub struct Fusion {
    pub state: FusedState,
    pub noise: FusionNoise,
    pub gravity: f64,
    history: VecDeque<(f64, FusionVector)>,
}

impl Fusion {
    pub fn new(state: FusedState, noise: FusionNoise, gravity: f64) -> Result<Self> {
        noise.validate()?;
        let mut history = VecDeque::new();
        history.push_back((state.stamp, state.mean));
        Ok(Self {
            state,
            noise,
            gravity,
            history,
        })
    }

    pub fn propagate(&mut self, imu: &ImuSample) -> Result<&FusedState> {
        self.state = fusion_propagate(&self.state, imu, self.gravity, &self.noise)?;
        self.history.push_back((self.state.stamp, self.state.mean));
        while self
            .history
            .front()
            .is_some_and(|(t, _)| *t < self.state.stamp - HISTORY_SECONDS)
        {
            self.history.pop_front();
        }
        Ok(&self.state)
    }

    /// Estimated mean at `stamp`, interpolated from the history.
    fn mean_at(&self, stamp: f64) -> Option<FusionVector> {
        let i = self.history.partition_point(|(t, _)| *t <= stamp);
        if i == 0 {
            return self.history.front().map(|(_, m)| *m);
        }
        let (t0, m0) = self.history[i - 1];
        let Some(&(t1, m1)) = self.history.get(i) else {
            return Some(m0);
        };
        let a = (stamp - t0) / (t1 - t0);
        let mut d = m1 - m0;
        d[8] = wrap_angle(d[8]);
        Some(m0 + d * a)
    }

    pub fn update(&mut self, z: &OdometryMeasurement) -> Result<&FusedState> {
        let shifted = match self.mean_at(z.stamp) {
            Some(then) if z.stamp < self.state.stamp => {
                let d = self.state.mean - then;
                OdometryMeasurement {
                    p: z.p + Vec3::new(d[0], d[1], d[2]),
                    v: z.v + Vec3::new(d[3], d[4], d[5]),
                    attitude: EulerAngles::new(
                        z.attitude.roll + d[6],
                        z.attitude.pitch + d[7],
                        wrap_angle(z.attitude.yaw + wrap_angle(d[8])),
                    ),
                    stamp: self.state.stamp,
                    ..*z
                }
            }
            _ => *z,
        };
        let before = self.state.mean;
        self.state = fusion_update(&self.state, &shifted)?;
        let mut delta = self.state.mean - before;
        delta[8] = wrap_angle(delta[8]);
        for (_, m) in self.history.iter_mut() {
            *m += delta;
            m[8] = wrap_angle(m[8]);
        }
        Ok(&self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kalman::is_valid_covariance;

    const G: f64 = 9.81;

    fn start() -> FusedState {
        FusedState::new(Vec3::zeros(), Vec3::zeros(), EulerAngles::zeros(), 0.1, 0.01, 0.0)
    }

    fn imu(t: f64, accel: Vec3<f64>) -> ImuSample {
        ImuSample {
            stamp: t,
            gyro: Vec3::zeros(),
            accel,
        }
    }

    #[test]
    fn stationary_imu_keeps_state() {
        let mut s = start();
        for i in 1..=50 {
            s = fusion_propagate(
                &s,
                &imu(i as f64 * 0.02, Vec3::new(0.0, 0.0, G)),
                G,
                &FusionNoise::default(),
            )
            .unwrap();
            assert!(is_valid_covariance(&s.covariance));
        }
        assert!(s.mean.fixed_rows::<9>(0).amax() < 1e-12);
    }

    #[test]
    fn constant_acceleration_kinematics() {
        let mut s = start();
        for i in 1..=50 {
            s = fusion_propagate(
                &s,
                &imu(i as f64 * 0.02, Vec3::new(1.0, 0.0, G)),
                G,
                &FusionNoise::default(),
            )
            .unwrap();
        }
        assert!((s.velocity().x - 1.0).abs() < 1e-3);
        assert!((s.position().x - 0.5).abs() < 1e-3);
    }

    #[test]
    fn out_of_order_rejected() {
        let s = fusion_propagate(&start(), &imu(1.0, Vec3::new(0.0, 0.0, G)), G, &FusionNoise::default()).unwrap();
        assert!(matches!(
            fusion_propagate(&s, &imu(0.5, Vec3::new(0.0, 0.0, G)), G, &FusionNoise::default()),
            Err(Error::OutOfOrder { .. })
        ));
    }

    fn odo(p: Vec3<f64>, att: EulerAngles<f64>, stamp: f64) -> OdometryMeasurement {
        OdometryMeasurement {
            p,
            attitude: att,
            v: Vec3::zeros(),
            stamp,
            position_var: 1e-4,
            attitude_var: 1e-4,
            velocity_var: 1e-4,
        }
    }

    #[test]
    fn matching_measurement_keeps_mean() {
        let s = start();
        let n = fusion_update(&s, &odo(Vec3::zeros(), EulerAngles::zeros(), 0.0)).unwrap();
        assert_eq!(n.mean, s.mean);
        assert!(n.covariance.trace() <= s.covariance.trace());
    }

    #[test]
    fn yaw_innovation_wraps() {
        let pi = std::f64::consts::PI;
        let mut s = start();
        s.mean[8] = -pi + 0.01;
        let n = fusion_update(&s, &odo(Vec3::zeros(), EulerAngles::new(0.0, 0.0, pi - 0.01), 0.0)).unwrap();
        // the correction moves yaw by a fraction of -0.02, never by ~2 pi
        let moved = wrap_angle(n.mean[8] - s.mean[8]);
        assert!(moved < 0.0 && moved > -0.02, "{moved}");
    }

    #[test]
    fn rotation_partials_match_differences() {
        let a = EulerAngles::new(0.3, -0.2, 1.1);
        let d = rot_partials(&a);
        let h = 1e-6;
        for k in 0..3 {
            let mut p = a.to_vec3().to_array();
            let mut m = p;
            p[k] += h;
            m[k] -= h;
            let num = (rot(&EulerAngles::new(p[0], p[1], p[2])) - rot(&EulerAngles::new(m[0], m[1], m[2]))) / (2.0 * h);
            assert!((num - d[k]).amax() < 1e-8);
        }
        let w = Vector3::new(0.4, -0.3, 0.9);
        let e = euler_rate_partials(&a, w);
        for k in 0..2 {
            let mut p = a;
            let mut m = a;
            if k == 0 {
                p.roll += h;
                m.roll -= h;
            } else {
                p.pitch += h;
                m.pitch -= h;
            }
            let wv = Vec3::new(w.x, w.y, w.z);
            let num = (na(euler_rates_from_body_rates(&p, wv)) - na(euler_rates_from_body_rates(&m, wv))) / (2.0 * h);
            assert!((num - e.column(k)).amax() < 1e-8);
        }
    }

    #[test]
    fn delayed_measurement_compares_against_past_state() {
        let noise = FusionNoise::default();
        let mut f = Fusion::new(start(), noise, G).unwrap();
        // constant 1 m/s^2 along x from rest
        for i in 1..=50 {
            f.propagate(&imu(i as f64 * 0.02, Vec3::new(1.0, 0.0, G))).unwrap();
        }
        let then = f.mean_at(0.5).unwrap();
        assert!((then[3] - 0.5).abs() < 1e-9);
        // a perfect measurement of the state at t = 0.5 leaves the mean alone
        let z = OdometryMeasurement {
            p: Vec3::new(then[0], then[1], then[2]),
            attitude: EulerAngles::zeros(),
            v: Vec3::new(then[3], 0.0, 0.0),
            stamp: 0.5,
            position_var: 1e-4,
            attitude_var: 1e-4,
            velocity_var: 1e-4,
        };
        let before = f.state.mean;
        f.update(&z).unwrap();
        assert!((f.state.mean - before).amax() < 1e-12);
    }
}
