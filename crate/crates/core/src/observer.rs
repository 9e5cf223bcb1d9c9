//! Augmented EKF estimating the lumped external force alongside position, velocity and
//! the second-order roll/pitch response.
//!
//! State layout: `p(3) v(3) roll pitch roll_rate pitch_rate F_ext(3)`. Heading is not
//! estimated; the caller supplies it with every prediction.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{dynamics_jacobians, mav_dynamics, ControlInput, StateVector, VehicleParams};
use crate::error::{Error, Result};
use crate::frames::{EulerAngles, Vec3};
use crate::kalman::{is_valid_covariance, joseph_update, symmetrize, UpdateOutcome};
use crate::sysid::SecondOrderModel;

pub const OBS_DIM: usize = 13;
pub const OBS_MEAS_DIM: usize = 8;

pub type ObsVector = SVector<f64, OBS_DIM>;
pub type ObsMatrix = SMatrix<f64, OBS_DIM, OBS_DIM>;
pub type ObsMeasurement = SVector<f64, OBS_MEAS_DIM>;

const GATE_SIGMA: f64 = 5.0;

/// Prediction model: rigid-body translation with second-order roll/pitch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObserverModel {
    pub params: VehicleParams<f64>,
    pub roll: SecondOrderModel<f64>,
    pub pitch: SecondOrderModel<f64>,
}

impl Default for ObserverModel {
    fn default() -> Self {
        Self {
            params: VehicleParams::default(),
            roll: SecondOrderModel {
                k: 26.37 / 27.04,
                zeta: 5.32 / (2.0 * 27.04_f64.sqrt()),
                omega: 27.04_f64.sqrt(),
            },
            pitch: SecondOrderModel {
                k: 28.86 / 27.45,
                zeta: 6.00 / (2.0 * 27.45_f64.sqrt()),
                omega: 27.45_f64.sqrt(),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverNoise {
    /// Process PSDs per block.
    pub position_psd: f64,
    pub velocity_psd: f64,
    pub attitude_psd: f64,
    pub attitude_rate_psd: f64,
    /// Force random walk, N^2/s.
    pub force_psd: f64,
    /// Measurement variances.
    pub position_var: f64,
    pub velocity_var: f64,
    pub attitude_var: f64,
}

impl Default for ObserverNoise {
    fn default() -> Self {
        Self {
            position_psd: 1e-6,
            velocity_psd: 1e-2,
            attitude_psd: 1e-6,
            attitude_rate_psd: 1e-2,
            force_psd: 0.5,
            position_var: 1e-4,
            velocity_var: 1e-3,
            attitude_var: 1e-5,
        }
    }
}

impl ObserverNoise {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.position_psd,
            self.velocity_psd,
            self.attitude_psd,
            self.attitude_rate_psd,
            self.force_psd,
            self.position_var,
            self.velocity_var,
            self.attitude_var,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("observer noise terms must be positive".into()))
        }
    }

    pub fn process(&self) -> ObsMatrix {
        let d = [
            self.position_psd,
            self.position_psd,
            self.position_psd,
            self.velocity_psd,
            self.velocity_psd,
            self.velocity_psd,
            self.attitude_psd,
            self.attitude_psd,
            self.attitude_rate_psd,
            self.attitude_rate_psd,
            self.force_psd,
            self.force_psd,
            self.force_psd,
        ];
        ObsMatrix::from_diagonal(&ObsVector::from_fn(|i, _| d[i]))
    }

    pub fn measurement(&self) -> SMatrix<f64, OBS_MEAS_DIM, OBS_MEAS_DIM> {
        let d = [
            self.position_var,
            self.position_var,
            self.position_var,
            self.velocity_var,
            self.velocity_var,
            self.velocity_var,
            self.attitude_var,
            self.attitude_var,
        ];
        SMatrix::from_diagonal(&ObsMeasurement::from_fn(|i, _| d[i]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObserverState {
    pub mean: ObsVector,
    pub covariance: ObsMatrix,
}

impl ObserverState {
    pub fn new(mean: ObsVector, covariance: ObsMatrix) -> Result<Self> {
        if mean.iter().any(|v| !v.is_finite()) || !is_valid_covariance(&covariance) {
            return Err(Error::InvalidInput(
                "observer state must be finite with a valid covariance".into(),
            ));
        }
        Ok(Self { mean, covariance })
    }

    /// Starts at a known kinematic state with zero force and diagonal uncertainty.
    pub fn from_state(x: &StateVector<f64>, sigma_kinematic: f64, sigma_force: f64) -> Self {
        let mut mean = ObsVector::zeros();
        mean.fixed_rows_mut::<3>(0).copy_from_slice(&x.p.to_array());
        mean.fixed_rows_mut::<3>(3).copy_from_slice(&x.v.to_array());
        mean[6] = x.attitude.roll;
        mean[7] = x.attitude.pitch;
        let mut d = ObsVector::from_element(sigma_kinematic * sigma_kinematic);
        for i in 10..13 {
            d[i] = sigma_force * sigma_force;
        }
        Self {
            mean,
            covariance: ObsMatrix::from_diagonal(&d),
        }
    }

    pub fn position(&self) -> Vec3<f64> {
        Vec3::new(self.mean[0], self.mean[1], self.mean[2])
    }

    pub fn velocity(&self) -> Vec3<f64> {
        Vec3::new(self.mean[3], self.mean[4], self.mean[5])
    }
}

/// Force estimate and its covariance block.
pub fn external_force(s: &ObserverState) -> (Vec3<f64>, SMatrix<f64, 3, 3>) {
    (
        Vec3::new(s.mean[10], s.mean[11], s.mean[12]),
        s.covariance.fixed_view::<3, 3>(10, 10).into_owned(),
    )
}

fn kinematic(x: &ObsVector, yaw: f64) -> StateVector<f64> {
    StateVector::new(
        Vec3::new(x[0], x[1], x[2]),
        Vec3::new(x[3], x[4], x[5]),
        EulerAngles::new(x[6], x[7], yaw),
    )
}

fn derivative(m: &ObserverModel, x: &ObsVector, u: &ControlInput<f64>, yaw: f64) -> ObsVector {
    let f = Vec3::new(x[10], x[11], x[12]);
    let d = mav_dynamics(&kinematic(x, yaw), u, &m.params, f);
    let lag = |s: &SecondOrderModel<f64>, cmd: f64, a: f64, rate: f64| {
        s.omega * s.omega * (s.k * cmd - a) - 2.0 * s.zeta * s.omega * rate
    };
    let mut out = ObsVector::zeros();
    out.fixed_rows_mut::<3>(0).copy_from_slice(&d.p.to_array());
    out.fixed_rows_mut::<3>(3).copy_from_slice(&d.v.to_array());
    out[6] = x[8];
    out[7] = x[9];
    out[8] = lag(&m.roll, u.roll, x[6], x[8]);
    out[9] = lag(&m.pitch, u.pitch, x[7], x[9]);
    out
}

/// Continuous-time Jacobian of [`derivative`] with respect to the state.
fn jacobian(m: &ObserverModel, x: &ObsVector, u: &ControlInput<f64>, yaw: f64) -> ObsMatrix {
    let (a9, _) = dynamics_jacobians(&kinematic(x, yaw), u, &m.params);
    let mut a = ObsMatrix::zeros();
    for i in 0..3 {
        a[(i, 3 + i)] = 1.0;
        for j in 3..8 {
            a[(3 + i, j)] = a9[3 + i][j];
        }
        a[(3 + i, 10 + i)] = 1.0 / m.params.mass;
    }
    a[(6, 8)] = 1.0;
    a[(7, 9)] = 1.0;
    for (row, s) in [(8, &m.roll), (9, &m.pitch)] {
        a[(row, row - 2)] = -s.omega * s.omega;
        a[(row, row)] = -2.0 * s.zeta * s.omega;
    }
    a
}

/// Propagates mean (RK4) and covariance (second-order transition matrix) over `dt`.
pub fn observer_predict(
    s: &ObserverState,
    u: &ControlInput<f64>,
    yaw: f64,
    model: &ObserverModel,
    noise: &ObserverNoise,
    dt: f64,
) -> Result<ObserverState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "prediction step must be positive, got {dt}"
        )));
    }
    let x = &s.mean;
    let k1 = derivative(model, x, u, yaw);
    let k2 = derivative(model, &(x + k1 * (dt / 2.0)), u, yaw);
    let k3 = derivative(model, &(x + k2 * (dt / 2.0)), u, yaw);
    let k4 = derivative(model, &(x + k3 * dt), u, yaw);
    let mean = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

    let a = jacobian(model, x, u, yaw);
    let phi = ObsMatrix::identity() + a * dt + a * a * (dt * dt / 2.0);
    let covariance = symmetrize(&(phi * s.covariance * phi.transpose() + noise.process() * dt));
    Ok(ObserverState { mean, covariance })
}

/// Measurement `(p, v, roll, pitch)`.
pub fn observer_measurement(x: &StateVector<f64>) -> ObsMeasurement {
    let a = x.to_array();
    ObsMeasurement::from_fn(|i, _| a[i])
}

pub fn observer_update(s: &ObserverState, z: &ObsMeasurement, noise: &ObserverNoise) -> (ObserverState, UpdateOutcome) {
    if z.iter().any(|v| !v.is_finite()) {
        return (*s, UpdateOutcome::Gated);
    }
    let mut h = SMatrix::<f64, OBS_MEAS_DIM, OBS_DIM>::zeros();
    for i in 0..OBS_MEAS_DIM {
        h[(i, i)] = 1.0;
    }
    let innovation = z - h * s.mean;
    let mut out = *s;
    let outcome = joseph_update(
        &mut out.mean,
        &mut out.covariance,
        &h,
        &noise.measurement(),
        &innovation,
        GATE_SIGMA,
    );
    (out, outcome)
}

/// Stateful wrapper counting gated measurements.
#[derive(Clone, Debug)]
pub struct Observer {
    pub state: ObserverState,
    pub model: ObserverModel,
    pub noise: ObserverNoise,
    gated: u64,
}

impl Observer {
    pub fn new(state: ObserverState, model: ObserverModel, noise: ObserverNoise) -> Result<Self> {
        noise.validate()?;
        model.params.validate()?;
        Ok(Self {
            state,
            model,
            noise,
            gated: 0,
        })
    }

    pub fn gated(&self) -> u64 {
        self.gated
    }

    pub fn predict(&mut self, u: &ControlInput<f64>, yaw: f64, dt: f64) -> Result<()> {
        self.state = observer_predict(&self.state, u, yaw, &self.model, &self.noise, dt)?;
        Ok(())
    }

    pub fn update(&mut self, z: &ObsMeasurement) -> UpdateOutcome {
        let (s, o) = observer_update(&self.state, z, &self.noise);
        self.state = s;
        if o == UpdateOutcome::Gated {
            self.gated += 1;
        }
        o
    }

    pub fn force(&self) -> Vec3<f64> {
        external_force(&self.state).0
    }
}
