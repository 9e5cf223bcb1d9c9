//! Translational MAV model with first-order roll/pitch response, and its integrator.
//!
//! ```text
//! p' = v
//! v' = (R(phi, theta, psi) [0 0 T]^T - T K_drag v + F_ext) / m - [0 0 g]^T
//! phi'   = (k_phi u_phi - phi) / tau_phi
//! theta' = (k_theta u_theta - theta) / tau_theta
//! psi'   = u_psi_dot
//! ```
//! with `K_drag = diag(k_d, k_d, 0)` acting on the world-frame velocity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{rotation_from_euler, EulerAngles, Vec3};
use crate::scalar::Real;

pub const STATE_DIM: usize = 9;
pub const INPUT_DIM: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateVector<T> {
    pub p: Vec3<T>,
    pub v: Vec3<T>,
    pub attitude: EulerAngles<T>,
}

/// Time derivative of a [`StateVector`]; same layout.
pub type StateDerivative<T> = StateVector<T>;

impl<T: Real> StateVector<T> {
    pub fn new(p: Vec3<T>, v: Vec3<T>, attitude: EulerAngles<T>) -> Self {
        Self { p, v, attitude }
    }

    pub fn zeros() -> Self {
        Self::new(Vec3::zeros(), Vec3::zeros(), EulerAngles::zeros())
    }

    pub fn at_rest(p: Vec3<T>) -> Self {
        Self::new(p, Vec3::zeros(), EulerAngles::zeros())
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.v.is_finite() && self.attitude.is_finite()
    }

    pub fn to_array(&self) -> [T; STATE_DIM] {
        let a = &self.attitude;
        [
            self.p.x, self.p.y, self.p.z, self.v.x, self.v.y, self.v.z, a.roll, a.pitch, a.yaw,
        ]
    }

    pub fn from_array(a: [T; STATE_DIM]) -> Self {
        Self::new(
            Vec3::new(a[0], a[1], a[2]),
            Vec3::new(a[3], a[4], a[5]),
            EulerAngles::new(a[6], a[7], a[8]),
        )
    }

    /// `self + h * d`, component-wise.
    pub fn add_scaled(&self, d: &StateDerivative<T>, h: T) -> Self {
        Self::new(
            self.p + d.p * h,
            self.v + d.v * h,
            EulerAngles::new(
                self.attitude.roll + d.attitude.roll * h,
                self.attitude.pitch + d.attitude.pitch * h,
                self.attitude.yaw + d.attitude.yaw * h,
            ),
        )
    }

    pub fn max_abs(&self) -> T {
        self.to_array().iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Physical control input: roll/pitch references (rad), collective thrust (N), yaw rate (rad/s).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput<T> {
    pub roll: T,
    pub pitch: T,
    pub thrust: T,
    pub yaw_rate: T,
}

impl<T: Real> ControlInput<T> {
    pub fn new(roll: T, pitch: T, thrust: T, yaw_rate: T) -> Self {
        Self {
            roll,
            pitch,
            thrust,
            yaw_rate,
        }
    }

    pub fn to_array(&self) -> [T; INPUT_DIM] {
        [self.roll, self.pitch, self.thrust, self.yaw_rate]
    }

    pub fn from_array(a: [T; INPUT_DIM]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams<T> {
    /// kg
    pub mass: T,
    /// Diagonal horizontal entry of `K_drag`.
    pub drag: T,
    pub gravity: T,
    pub tau_roll: T,
    pub tau_pitch: T,
    pub gain_roll: T,
    pub gain_pitch: T,
    /// N
    pub thrust_max: T,
    /// rad
    pub attitude_limit: T,
}

impl<T: Real> Default for VehicleParams<T> {
    /// Matrice 100 with payload: 3.62 kg, first-order attitude model from flight data.
    fn default() -> Self {
        let mass = T::lit(3.62);
        let gravity = T::lit(9.81);
        Self {
            mass,
            drag: T::lit(0.01),
            gravity,
            tau_roll: T::lit(0.472),
            tau_pitch: T::lit(0.472),
            gain_roll: T::lit(1.673),
            gain_pitch: T::lit(1.575),
            thrust_max: T::lit(2.0) * mass * gravity,
            attitude_limit: T::FRAC_PI_6(),
        }
    }
}

impl<T: Real> VehicleParams<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !(pos(self.mass) && pos(self.gravity) && pos(self.tau_roll) && pos(self.tau_pitch)) {
            return Err(Error::InvalidInput(
                "mass, gravity and time constants must be positive".into(),
            ));
        }
        if !(pos(self.gain_roll) && pos(self.gain_pitch)) {
            return Err(Error::InvalidInput("attitude gains must be positive".into()));
        }
        if !(self.drag >= T::zero()) {
            return Err(Error::InvalidInput("drag coefficient must be non-negative".into()));
        }
        if !(self.thrust_max > self.mass * self.gravity) {
            return Err(Error::InvalidInput("thrust_max must exceed the vehicle weight".into()));
        }
        if !(pos(self.attitude_limit) && self.attitude_limit < T::FRAC_PI_2()) {
            return Err(Error::InvalidInput("attitude limit must lie in (0, pi/2)".into()));
        }
        Ok(())
    }

    pub fn hover_thrust(&self) -> T {
        self.mass * self.gravity
    }
}

/// Continuous-time state derivative.
pub fn mav_dynamics<T: Real>(
    x: &StateVector<T>,
    u: &ControlInput<T>,
    params: &VehicleParams<T>,
    f_ext: Vec3<T>,
) -> StateDerivative<T> {
    let r = rotation_from_euler(&x.attitude);
    let thrust_dir = r.mul_vec(Vec3::unit_z());
    let drag = Vec3::new(params.drag * x.v.x, params.drag * x.v.y, T::zero());
    let force = thrust_dir * u.thrust - drag * u.thrust + f_ext;
    let accel = force / params.mass - Vec3::unit_z() * params.gravity;
    StateVector::new(
        x.v,
        accel,
        EulerAngles::new(
            (params.gain_roll * u.roll - x.attitude.roll) / params.tau_roll,
            (params.gain_pitch * u.pitch - x.attitude.pitch) / params.tau_pitch,
            u.yaw_rate,
        ),
    )
}

/// Analytic Jacobians `(df/dx, df/du)` of [`mav_dynamics`], row-major.
pub fn dynamics_jacobians<T: Real>(
    x: &StateVector<T>,
    u: &ControlInput<T>,
    params: &VehicleParams<T>,
) -> ([[T; STATE_DIM]; STATE_DIM], [[T; INPUT_DIM]; STATE_DIM]) {
    let z = T::zero();
    let mut a = [[z; STATE_DIM]; STATE_DIM];
    let mut b = [[z; INPUT_DIM]; STATE_DIM];
    for i in 0..3 {
        a[i][3 + i] = T::one();
    }
    let (sr, cr) = x.attitude.roll.sin_cos();
    let (sp, cp) = x.attitude.pitch.sin_cos();
    let (sy, cy) = x.attitude.yaw.sin_cos();
    let t_m = u.thrust / params.mass;
    let d_roll = [-cy * sp * sr + sy * cr, -sy * sp * sr - cy * cr, -cp * sr];
    let d_pitch = [cy * cp * cr, sy * cp * cr, -sp * cr];
    let d_yaw = [-sy * sp * cr + cy * sr, cy * sp * cr + sy * sr, z];
    let dir = [cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr];
    let kv = [params.drag * x.v.x, params.drag * x.v.y, z];
    for i in 0..3 {
        a[3 + i][6] = t_m * d_roll[i];
        a[3 + i][7] = t_m * d_pitch[i];
        a[3 + i][8] = t_m * d_yaw[i];
        b[3 + i][2] = (dir[i] - kv[i]) / params.mass;
    }
    a[3][3] = -t_m * params.drag;
    a[4][4] = -t_m * params.drag;
    a[6][6] = -T::one() / params.tau_roll;
    a[7][7] = -T::one() / params.tau_pitch;
    b[6][0] = params.gain_roll / params.tau_roll;
    b[7][1] = params.gain_pitch / params.tau_pitch;
    b[8][3] = T::one();
    (a, b)
}

/// Classical RK4 step with the input and external force held over the step.
pub fn rk4_step<T: Real>(
    x: &StateVector<T>,
    u: &ControlInput<T>,
    params: &VehicleParams<T>,
    f_ext: Vec3<T>,
    dt: T,
) -> StateVector<T> {
    let half = dt / T::lit(2.0);
    let k1 = mav_dynamics(x, u, params, f_ext);
    let k2 = mav_dynamics(&x.add_scaled(&k1, half), u, params, f_ext);
    let k3 = mav_dynamics(&x.add_scaled(&k2, half), u, params, f_ext);
    let k4 = mav_dynamics(&x.add_scaled(&k3, dt), u, params, f_ext);
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let mut out = x.to_array();
    let (a1, a2, a3, a4) = (k1.to_array(), k2.to_array(), k3.to_array(), k4.to_array());
    for i in 0..STATE_DIM {
        out[i] = out[i] + sixth * (a1[i] + two * a2[i] + two * a3[i] + a4[i]);
    }
    StateVector::from_array(out)
}

/// Equilibrium attitude and input for a reference motion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyState<T> {
    pub attitude: EulerAngles<T>,
    pub input: ControlInput<T>,
}

/// Attitude and input that realize acceleration `accel` at velocity `vel` and heading
/// `yaw` under external force `f_ext`. Solves the force balance exactly.
pub fn steady_state<T: Real>(
    params: &VehicleParams<T>,
    f_ext: Vec3<T>,
    accel: Vec3<T>,
    vel: Vec3<T>,
    yaw: T,
) -> Result<SteadyState<T>> {
    let required = (accel + Vec3::unit_z() * params.gravity) * params.mass - f_ext;
    if !required.is_finite() {
        return Err(Error::InvalidInput("non-finite force balance".into()));
    }
    if required.z <= T::zero() {
        return Err(Error::Infeasible(format!(
            "required vertical thrust {} N is not positive",
            required.z.as_f64()
        )));
    }
    let kv = Vec3::new(params.drag * vel.x, params.drag * vel.y, T::zero());
    // thrust * (dir - K v) = required; fixed point on the thrust magnitude
    let mut thrust = required.norm();
    for _ in 0..50 {
        let next = (required + kv * thrust).norm();
        let done = (next - thrust).abs() <= T::epsilon() * next * T::lit(4.0);
        thrust = next;
        if done {
            break;
        }
    }
    let dir = (required + kv * thrust) / thrust;
    // dir expressed in the yaw-aligned frame is (sin(pitch) cos(roll), -sin(roll), cos(pitch) cos(roll))
    let (sy, cy) = yaw.sin_cos();
    let hx = cy * dir.x + sy * dir.y;
    let hy = -sy * dir.x + cy * dir.y;
    let roll = (-hy).max(-T::one()).min(T::one()).asin();
    let pitch = hx.atan2(dir.z);
    if thrust > params.thrust_max {
        return Err(Error::Infeasible(format!(
            "required thrust {} N exceeds thrust_max {} N",
            thrust.as_f64(),
            params.thrust_max.as_f64()
        )));
    }
    let input = ControlInput::new(roll / params.gain_roll, pitch / params.gain_pitch, thrust, T::zero());
    let lim = params.attitude_limit;
    if roll.abs() > lim || pitch.abs() > lim || input.roll.abs() > lim || input.pitch.abs() > lim {
        return Err(Error::Infeasible(format!(
            "required attitude ({}, {}) rad exceeds limit {} rad",
            roll.as_f64(),
            pitch.as_f64(),
            lim.as_f64()
        )));
    }
    Ok(SteadyState {
        attitude: EulerAngles::new(roll, pitch, yaw),
        input,
    })
}

/// Hover equilibrium at heading `yaw` under a constant external force.
pub fn hover_equilibrium<T: Real>(params: &VehicleParams<T>, f_ext: Vec3<T>, yaw: T) -> Result<SteadyState<T>> {
    steady_state(params, f_ext, Vec3::zeros(), Vec3::zeros(), yaw)
}

/// Input holding the vehicle at rest (heading zero) under `f_ext`.
pub fn hover_input<T: Real>(params: &VehicleParams<T>, f_ext: Vec3<T>) -> Result<ControlInput<T>> {
    hover_equilibrium(params, f_ext, T::zero()).map(|s| s.input)
}
