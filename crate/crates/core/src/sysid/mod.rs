//! System identification from flight logs: command scaling, attitude/velocity
//! transfer functions, dead zones and trim.
//!
//! Models are fitted by output error: the candidate model is simulated over the whole
//! record with an exact zero-order-hold discretization and the squared difference to
//! the measured output is minimized. Models carry no dead time.

mod fit;
mod log;
mod procedures;
mod scales;

pub use fit::{
    fit_first_order, fit_first_order_with, fit_second_order, fit_second_order_with, simulate_first_order,
    simulate_second_order, FitOptions,
};
pub use log::{FlightLog, FlightRecord, FLIGHT_LOG_HEADER};
pub use procedures::{detect_dead_zone, estimate_trim, estimate_trim_with_bound, DEFAULT_MOTION_THRESHOLD};
pub use scales::estimate_scales;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Full-scale magnitude of a transmitter stick, in counts.
pub const COMMAND_RANGE: f64 = 1024.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    #[serde(rename = "phi")]
    Roll,
    #[serde(rename = "theta")]
    Pitch,
    #[serde(rename = "psidot")]
    YawRate,
    #[serde(rename = "vz")]
    Vertical,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Roll, Channel::Pitch, Channel::YawRate, Channel::Vertical];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Roll => "phi",
            Channel::Pitch => "theta",
            Channel::YawRate => "psidot",
            Channel::Vertical => "vz",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown channel '{s}' (expected phi|theta|psidot|vz)")))
    }
}

/// Unitless transmitter command per channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActuatorCommand {
    pub c_phi: f64,
    pub c_theta: f64,
    pub c_psi_dot: f64,
    pub c_vz: f64,
}

impl ActuatorCommand {
    pub fn new(c_phi: f64, c_theta: f64, c_psi_dot: f64, c_vz: f64) -> Self {
        Self {
            c_phi,
            c_theta,
            c_psi_dot,
            c_vz,
        }
    }

    pub fn get(&self, ch: Channel) -> f64 {
        self.to_array()[ch.index()]
    }

    pub fn set(&mut self, ch: Channel, v: f64) {
        let mut a = self.to_array();
        a[ch.index()] = v;
        *self = Self::from_array(a);
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.c_phi, self.c_theta, self.c_psi_dot, self.c_vz]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn validate(&self) -> Result<()> {
        for (ch, v) in Channel::ALL.into_iter().zip(self.to_array()) {
            if !(v.abs() <= COMMAND_RANGE) {
                return Err(Error::InvalidInput(format!("{ch} command {v} outside [-1024, 1024]")));
            }
        }
        Ok(())
    }

    /// Clamps every channel into the transmitter range.
    pub fn saturated(&self) -> Self {
        Self::from_array(self.to_array().map(|v| v.clamp(-COMMAND_RANGE, COMMAND_RANGE)))
    }
}

/// Physical units per command count: rad, rad, rad/s, m/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub lambda_phi: f64,
    pub lambda_theta: f64,
    pub lambda_psi_dot: f64,
    pub lambda_vz: f64,
}

impl Default for ScaleParams {
    /// Values identified on the Matrice 100 with motion capture.
    fn default() -> Self {
        Self {
            lambda_phi: 8.65e-4,
            lambda_theta: 8.44e-4,
            lambda_psi_dot: 2.24e-3,
            lambda_vz: 2.65e-3,
        }
    }
}

impl ScaleParams {
    pub fn get(&self, ch: Channel) -> f64 {
        self.to_array()[ch.index()]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.lambda_phi, self.lambda_theta, self.lambda_psi_dot, self.lambda_vz]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            lambda_phi: a[0],
            lambda_theta: a[1],
            lambda_psi_dot: a[2],
            lambda_vz: a[3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().all(|l| *l > 0.0 && l.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("scale parameters must be strictly positive".into()))
        }
    }
}

/// `y(s)/u(s) = k / (tau s + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderModel<T> {
    pub k: T,
    pub tau: T,
}

impl<T: Real> FirstOrderModel<T> {
    pub fn new(k: T, tau: T) -> Result<Self> {
        if !(k > T::zero() && tau > T::zero() && k.is_finite() && tau.is_finite()) {
            return Err(Error::InvalidInput("first-order model needs k > 0 and tau > 0".into()));
        }
        Ok(Self { k, tau })
    }

    /// `(b, a)` of `b / (s + a)`.
    pub fn to_tf(&self) -> (T, T) {
        (self.k / self.tau, T::one() / self.tau)
    }

    pub fn step_response(&self, t: T) -> T {
        self.k * (T::one() - (-t / self.tau).exp())
    }
}

/// `y(s)/u(s) = k w^2 / (s^2 + 2 zeta w s + w^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderModel<T> {
    pub k: T,
    pub zeta: T,
    pub omega: T,
}

impl<T: Real> SecondOrderModel<T> {
    pub fn new(k: T, zeta: T, omega: T) -> Result<Self> {
        let ok = |v: T| v > T::zero() && v.is_finite();
        if !(ok(k) && ok(zeta) && ok(omega)) {
            return Err(Error::InvalidInput(
                "second-order model needs k, zeta, omega > 0".into(),
            ));
        }
        Ok(Self { k, zeta, omega })
    }

    /// `(b, a1, a0)` of `b / (s^2 + a1 s + a0)`.
    pub fn to_tf(&self) -> (T, T, T) {
        let w2 = self.omega * self.omega;
        (self.k * w2, T::lit(2.0) * self.zeta * self.omega, w2)
    }

    /// Unit-step response from rest.
    pub fn step_response(&self, t: T) -> T {
        let (k, z, w) = (self.k, self.zeta, self.omega);
        let one = T::one();
        if (z - one).abs() < T::lit(1e-9) {
            return k * (one - (one + w * t) * (-w * t).exp());
        }
        if z < one {
            let wd = w * (one - z * z).sqrt();
            let phi = (one - z * z).sqrt().atan2(z);
            k * (one - (-z * w * t).exp() * (wd * t + phi).sin() / (one - z * z).sqrt())
        } else {
            let r = (z * z - one).sqrt();
            let (p1, p2) = (-w * (z - r), -w * (z + r));
            k * (one + (p2 * (p1 * t).exp() - p1 * (p2 * t).exp()) / (p1 - p2))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LinearModel<T> {
    First(FirstOrderModel<T>),
    Second(SecondOrderModel<T>),
}

/// Canonical parameters of `b0/(s + a0)` (when `a1` is `None`) or `b0/(s^2 + a1 s + a0)`.
pub fn tf_to_params<T: Real>(b0: T, a1: Option<T>, a0: T) -> Result<LinearModel<T>> {
    if !(a0 > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "unstable denominator: a0 = {}",
            a0.as_f64()
        )));
    }
    match a1 {
        None => Ok(LinearModel::First(FirstOrderModel::new(b0 / a0, T::one() / a0)?)),
        Some(a1) => {
            if !(a1 > T::zero()) {
                return Err(Error::InvalidInput(format!(
                    "unstable denominator: a1 = {}",
                    a1.as_f64()
                )));
            }
            let omega = a0.sqrt();
            Ok(LinearModel::Second(SecondOrderModel::new(
                b0 / a0,
                a1 / (T::lit(2.0) * omega),
                omega,
            )?))
        }
    }
}

/// Symmetric-or-not band around neutral where the autopilot ignores commands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeadZone {
    pub lower: f64,
    pub upper: f64,
}

impl DeadZone {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= 0.0 && upper >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "dead zone [{lower}, {upper}] must contain 0"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn symmetric(half_width: f64) -> Self {
        Self {
            lower: -half_width.abs(),
            upper: half_width.abs(),
        }
    }

    /// Zero strictly inside the band, pass-through outside.
    pub fn apply(&self, c: f64) -> f64 {
        if c > self.lower && c < self.upper {
            0.0
        } else {
            c
        }
    }

    /// Pushes a non-zero command that would be swallowed to the band edge of the same sign.
    pub fn compensate(&self, c: f64) -> f64 {
        if c > 0.0 && c < self.upper {
            self.upper
        } else if c < 0.0 && c > self.lower {
            self.lower
        } else {
            c
        }
    }
}

/// Neutral stick offsets, in counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrimOffset {
    pub phi: f64,
    pub theta: f64,
    pub psi_dot: f64,
    pub vz: f64,
}

impl TrimOffset {
    pub const DEFAULT_BOUND: f64 = 200.0;

    pub fn get(&self, ch: Channel) -> f64 {
        self.to_array()[ch.index()]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.phi, self.theta, self.psi_dot, self.vz]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            phi: a[0],
            theta: a[1],
            psi_dot: a[2],
            vz: a[3],
        }
    }

    pub fn validate(&self, bound: f64) -> Result<()> {
        for (ch, v) in Channel::ALL.into_iter().zip(self.to_array()) {
            if !(v.abs() <= bound) {
                return Err(Error::InvalidInput(format!("{ch} trim {v} exceeds {bound} counts")));
            }
        }
        Ok(())
    }
}
