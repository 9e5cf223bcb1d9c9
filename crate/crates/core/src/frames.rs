//! Coordinate frames, 3-vectors and rotations.
//!
//! Frames follow the ROS convention used on the vehicle: world `W`, odometry `O`,
//! body `B` (x forward, y left, z up), camera `C` and the VI sensor IMU `V`.
//! Attitudes are ZYX Euler angles, `R = Rz(yaw) * Ry(pitch) * Rx(roll)`, mapping
//! body-frame vectors into the world frame.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{wrap_angle, Real};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn max_abs(self) -> T {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn component_mul(self, o: Self) -> Self {
        Self::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn map<U: Real>(self, f: impl Fn(T) -> U) -> Vec3<U> {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T: fmt::Display> fmt::Display for Vec3<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl From<Vec3<f64>> for nalgebra::Vector3<f64> {
    fn from(v: Vec3<f64>) -> Self {
        nalgebra::Vector3::new(v.x, v.y, v.z)
    }
}

impl From<nalgebra::Vector3<f64>> for Vec3<f64> {
    fn from(v: nalgebra::Vector3<f64>) -> Self {
        Vec3::new(v.x, v.y, v.z)
    }
}

/// Roll/pitch/yaw about the body x, y and z axes, in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles<T> {
    pub roll: T,
    pub pitch: T,
    pub yaw: T,
}

impl<T: Real> EulerAngles<T> {
    pub const fn new(roll: T, pitch: T, yaw: T) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.roll.is_finite() && self.pitch.is_finite() && self.yaw.is_finite()
    }

    /// Difference `self - other` with every component wrapped into (-pi, pi].
    pub fn wrapped_diff(&self, other: &Self) -> Self {
        Self::new(
            wrap_angle(self.roll - other.roll),
            wrap_angle(self.pitch - other.pitch),
            wrap_angle(self.yaw - other.yaw),
        )
    }

    pub fn to_vec3(self) -> Vec3<T> {
        Vec3::new(self.roll, self.pitch, self.yaw)
    }

    pub fn from_vec3(v: Vec3<T>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Row-major 3x3 rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix<T> {
    m: [[T; 3]; 3],
}

impl<T: Real> RotationMatrix<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    /// Wraps a raw matrix without checking orthonormality.
    pub fn from_rows_unchecked(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }

    /// Builds a rotation from raw rows, checking `R R^T = I` and `det R = 1` within `tol`.
    pub fn from_rows(m: [[T; 3]; 3], tol: T) -> Result<Self> {
        let r = Self { m };
        if !r.is_rotation(tol) {
            return Err(Error::InvalidInput("matrix is not a proper rotation".into()));
        }
        Ok(r)
    }

    pub fn rot_x(a: T) -> Self {
        let (s, c) = a.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, c, -s], [z, s, c]],
        }
    }

    pub fn rot_y(a: T) -> Self {
        let (s, c) = a.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[c, z, s], [z, o, z], [-s, z, c]],
        }
    }

    pub fn rot_z(a: T) -> Self {
        let (s, c) = a.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[c, -s, z], [s, c, z], [z, z, o]],
        }
    }

    pub fn rows(&self) -> [[T; 3]; 3] {
        self.m
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.m[r][c]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).fold(T::zero(), |acc, k| acc + self.m[i][k] * o.m[k][j]);
            }
        }
        Self { m: out }
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest absolute entry of `R R^T - I`.
    pub fn orthonormality_error(&self) -> T {
        let p = self.mul(&self.transpose());
        let mut worst = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((p.m[i][j] - target).abs());
            }
        }
        worst
    }

    pub fn is_rotation(&self, tol: T) -> bool {
        self.orthonormality_error() <= tol && (self.determinant() - T::one()).abs() <= tol
    }

    /// Recovers ZYX Euler angles; pitch is taken in [-pi/2, pi/2].
    pub fn to_euler(&self) -> EulerAngles<T> {
        let m = &self.m;
        let pitch = (-m[2][0]).max(-T::one()).min(T::one()).asin();
        let roll = m[2][1].atan2(m[2][2]);
        let yaw = m[1][0].atan2(m[0][0]);
        EulerAngles::new(roll, pitch, yaw)
    }
}

/// ZYX composition `Rz(yaw) * Ry(pitch) * Rx(roll)`, the body-to-world rotation.
pub fn rotation_from_euler<T: Real>(a: &EulerAngles<T>) -> RotationMatrix<T> {
    let (sr, cr) = a.roll.sin_cos();
    let (sp, cp) = a.pitch.sin_cos();
    let (sy, cy) = a.yaw.sin_cos();
    RotationMatrix::from_rows_unchecked([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])
}

/// Maps body angular velocity to ZYX Euler angle rates.
pub fn euler_rates_from_body_rates<T: Real>(a: &EulerAngles<T>, w: Vec3<T>) -> Vec3<T> {
    let (sr, cr) = a.roll.sin_cos();
    let (tp, cp) = (a.pitch.tan(), a.pitch.cos());
    Vec3::new(
        w.x + sr * tp * w.y + cr * tp * w.z,
        cr * w.y - sr * w.z,
        (sr * w.y + cr * w.z) / cp,
    )
}

/// Inverse of [`euler_rates_from_body_rates`].
pub fn body_rates_from_euler_rates<T: Real>(a: &EulerAngles<T>, rates: Vec3<T>) -> Vec3<T> {
    let (sr, cr) = a.roll.sin_cos();
    let (sp, cp) = a.pitch.sin_cos();
    Vec3::new(
        rates.x - sp * rates.z,
        cr * rates.y + sr * cp * rates.z,
        -sr * rates.y + cr * cp * rates.z,
    )
}

/// Re-expresses autopilot measurements given in North-East-Down into the z-up body
/// frame by a rotation of pi about x. The map is an involution.
pub fn ned_to_body_alignment<T: Real>(
    attitude: EulerAngles<T>,
    rates: Vec3<T>,
    accel: Vec3<T>,
) -> (EulerAngles<T>, Vec3<T>, Vec3<T>) {
    let flip = |v: Vec3<T>| Vec3::new(v.x, -v.y, -v.z);
    (
        EulerAngles::new(attitude.roll, -attitude.pitch, -attitude.yaw),
        flip(rates),
        flip(accel),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    World,
    Odometry,
    Body,
    Camera,
    VioImu,
}

impl Frame {
    pub fn label(self) -> char {
        match self {
            Frame::World => 'W',
            Frame::Odometry => 'O',
            Frame::Body => 'B',
            Frame::Camera => 'C',
            Frame::VioImu => 'V',
        }
    }
}

/// Rigid transform taking coordinates in `from` into coordinates in `to`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameTransform<T> {
    rotation: RotationMatrix<T>,
    translation: Vec3<T>,
    from: Frame,
    to: Frame,
}

impl<T: Real> FrameTransform<T> {
    pub fn new(rotation: RotationMatrix<T>, translation: Vec3<T>, from: Frame, to: Frame) -> Result<Self> {
        if from == to {
            return Err(Error::InvalidInput(format!(
                "transform source and target frame are both {}",
                from.label()
            )));
        }
        if !rotation.is_rotation(T::lit(1e-6)) {
            return Err(Error::InvalidInput("transform rotation is not in SO(3)".into()));
        }
        if !translation.is_finite() {
            return Err(Error::InvalidInput("transform translation is not finite".into()));
        }
        Ok(Self {
            rotation,
            translation,
            from,
            to,
        })
    }

    pub fn rotation(&self) -> &RotationMatrix<T> {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3<T> {
        self.translation
    }

    pub fn from_frame(&self) -> Frame {
        self.from
    }

    pub fn to_frame(&self) -> Frame {
        self.to
    }

    pub fn apply(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    pub fn apply_vector(&self, v: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(v)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -rt.mul_vec(self.translation),
            from: self.to,
            to: self.from,
        }
    }

    /// `self` after `inner`: maps `inner.from` into `self.to`.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if inner.to != self.from {
            return Err(Error::InvalidInput(format!(
                "cannot chain {}->{} after {}->{}",
                self.from.label(),
                self.to.label(),
                inner.from.label(),
                inner.to.label()
            )));
        }
        Self::new(
            self.rotation.mul(&inner.rotation),
            self.rotation.mul_vec(inner.translation) + self.translation,
            inner.from,
            self.to,
        )
    }
}
