//! The plant: rigid-body quadrotor behind the autopilot's command pipeline, wind,
//! and emulated vehicle IMU and visual odometry.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, VehicleParams};
use crate::error::{Error, Result};
use crate::frames::{body_rates_from_euler_rates, rotation_from_euler, EulerAngles, Vec3};
use crate::fusion::OdometryMeasurement;
use crate::scalar::wrap_angle;
use crate::sysid::{
    ActuatorCommand, Channel, DeadZone, FirstOrderModel, ScaleParams, SecondOrderModel, TrimOffset, COMMAND_RANGE,
};
use crate::timesync::ImuSample;

/// Expected `|(n1, n2, n3 / 2)|` for independent standard normals.
const DRIFT_NORM_FACTOR: f64 = 1.3637439531460902;

/// Path length over which the odometry drift rate is calibrated, m.
pub const DRIFT_CALIBRATION_LENGTH: f64 = 180.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub p: Vec3<f64>,
    pub v: Vec3<f64>,
    pub attitude: EulerAngles<f64>,
    /// Roll and pitch rates, rad/s.
    pub attitude_rates: [f64; 2],
    pub yaw_rate: f64,
    pub wind_force: Vec3<f64>,
    pub time: f64,
}

impl PlantState {
    pub fn at_rest(p: Vec3<f64>, yaw: f64) -> Self {
        Self {
            p,
            attitude: EulerAngles::new(0.0, 0.0, yaw),
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite()
            && self.v.is_finite()
            && self.attitude.is_finite()
            && self.attitude_rates.iter().all(|r| r.is_finite())
            && self.yaw_rate.is_finite()
            && self.wind_force.is_finite()
            && self.time.is_finite()
    }

    fn add_scaled(&self, d: &Derivative, h: f64) -> Self {
        Self {
            p: self.p + d.p * h,
            v: self.v + d.v * h,
            attitude: EulerAngles::new(
                self.attitude.roll + d.attitude.roll * h,
                self.attitude.pitch + d.attitude.pitch * h,
                self.attitude.yaw + d.attitude.yaw * h,
            ),
            attitude_rates: [
                self.attitude_rates[0] + d.attitude_rates[0] * h,
                self.attitude_rates[1] + d.attitude_rates[1] * h,
            ],
            yaw_rate: self.yaw_rate + d.yaw_rate * h,
            wind_force: self.wind_force,
            time: self.time,
        }
    }
}

/// Time derivative of the plant state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Derivative {
    pub p: Vec3<f64>,
    pub v: Vec3<f64>,
    pub attitude: EulerAngles<f64>,
    pub attitude_rates: [f64; 2],
    pub yaw_rate: f64,
    /// Collective thrust realized during the evaluation, N.
    pub thrust: f64,
}

/// How the vertical stick is interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerticalMode {
    /// Stick is a climb-rate command; the autopilot solves for thrust.
    Velocity,
    /// Stick maps linearly to collective thrust around hover.
    #[default]
    Thrust,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorModel {
    pub scales: ScaleParams,
    pub dead_zones: [DeadZone; 4],
    pub trims: TrimOffset,
    pub roll: SecondOrderModel<f64>,
    pub pitch: SecondOrderModel<f64>,
    pub yaw_rate: FirstOrderModel<f64>,
    pub vertical: FirstOrderModel<f64>,
    pub vertical_mode: VerticalMode,
}

impl Default for ActuatorModel {
    fn default() -> Self {
        Self {
            scales: ScaleParams::default(),
            dead_zones: [DeadZone::default(); 4],
            trims: TrimOffset::default(),
            roll: second_order_from_tf(26.37, 5.32, 27.04),
            pitch: second_order_from_tf(28.86, 6.00, 27.45),
            yaw_rate: FirstOrderModel { k: 1.057, tau: 0.161 },
            vertical: FirstOrderModel { k: 1.118, tau: 0.334 },
            vertical_mode: VerticalMode::Thrust,
        }
    }
}

fn second_order_from_tf(b0: f64, a1: f64, a0: f64) -> SecondOrderModel<f64> {
    let omega = a0.sqrt();
    SecondOrderModel {
        k: b0 / a0,
        zeta: a1 / (2.0 * omega),
        omega,
    }
}

impl ActuatorModel {
    pub fn validate(&self) -> Result<()> {
        self.scales.validate()?;
        for dz in &self.dead_zones {
            DeadZone::new(dz.lower, dz.upper)?;
        }
        self.trims.validate(TrimOffset::DEFAULT_BOUND)?;
        SecondOrderModel::new(self.roll.k, self.roll.zeta, self.roll.omega)?;
        SecondOrderModel::new(self.pitch.k, self.pitch.zeta, self.pitch.omega)?;
        FirstOrderModel::new(self.yaw_rate.k, self.yaw_rate.tau)?;
        FirstOrderModel::new(self.vertical.k, self.vertical.tau)?;
        Ok(())
    }

    /// Command after trim removal and the dead zone, still in counts.
    pub fn effective_counts(&self, cmd: &ActuatorCommand) -> [f64; 4] {
        let mut out = [0.0; 4];
        for ch in Channel::ALL {
            let i = ch.index();
            out[i] = self.dead_zones[i].apply(cmd.get(ch) - self.trims.get(ch));
        }
        out
    }

    /// Inverse of the pipeline for a controller working in physical units.
    ///
    /// Roll and pitch are setpoints before the attitude loop gain, yaw rate is the
    /// desired steady-state rate and thrust is in newtons.
    pub fn command_from_input(&self, u: &ControlInput<f64>, params: &VehicleParams<f64>) -> ActuatorCommand {
        let s = &self.scales;
        let raw = [
            u.roll / s.lambda_phi,
            u.pitch / s.lambda_theta,
            u.yaw_rate / (s.lambda_psi_dot * self.yaw_rate.k),
            (u.thrust - params.hover_thrust()) / thrust_scale(params),
        ];
        let mut cmd = ActuatorCommand::default();
        for ch in Channel::ALL {
            let i = ch.index();
            let c = self.dead_zones[i].compensate(raw[i]) + self.trims.get(ch);
            cmd.set(ch, c);
        }
        cmd.saturated()
    }
}

/// Thrust per count in thrust mode: full stick reaches `thrust_max`.
pub fn thrust_scale(params: &VehicleParams<f64>) -> f64 {
    (params.thrust_max - params.hover_thrust()) / COMMAND_RANGE
}

/// Continuous-time plant derivative with the command held.
pub fn plant_derivative(
    s: &PlantState,
    cmd: &ActuatorCommand,
    act: &ActuatorModel,
    params: &VehicleParams<f64>,
) -> Derivative {
    let c = act.effective_counts(cmd);
    let sc = &act.scales;
    let att = s.attitude;
    let lag = |m: &SecondOrderModel<f64>, u: f64, a: f64, rate: f64| {
        m.omega * m.omega * (m.k * u - a) - 2.0 * m.zeta * m.omega * rate
    };
    let roll_acc = lag(&act.roll, sc.lambda_phi * c[0], att.roll, s.attitude_rates[0]);
    let pitch_acc = lag(&act.pitch, sc.lambda_theta * c[1], att.pitch, s.attitude_rates[1]);
    let yaw_acc = (act.yaw_rate.k * sc.lambda_psi_dot * c[2] - s.yaw_rate) / act.yaw_rate.tau;

    let r = rotation_from_euler(&att);
    let e3 = r.mul_vec(Vec3::unit_z());
    let m = params.mass;
    let thrust = match act.vertical_mode {
        VerticalMode::Thrust => params.hover_thrust() + thrust_scale(params) * c[3],
        VerticalMode::Velocity => {
            let vz_dot = (act.vertical.k * sc.lambda_vz * c[3] - s.v.z) / act.vertical.tau;
            (m * (params.gravity + vz_dot) - s.wind_force.z) / e3.z.max(0.1)
        }
    }
    .clamp(0.0, params.thrust_max);
    let drag = Vec3::new(params.drag * s.v.x, params.drag * s.v.y, 0.0) * thrust;
    let accel = (e3 * thrust - drag + s.wind_force) / m - Vec3::unit_z() * params.gravity;
    Derivative {
        p: s.v,
        v: accel,
        attitude: EulerAngles::new(s.attitude_rates[0], s.attitude_rates[1], s.yaw_rate),
        attitude_rates: [roll_acc, pitch_acc],
        yaw_rate: yaw_acc,
        thrust,
    }
}

/// One RK4 step with the command and wind force held.
pub fn plant_step(
    s: &PlantState,
    cmd: &ActuatorCommand,
    act: &ActuatorModel,
    params: &VehicleParams<f64>,
    dt: f64,
) -> Result<PlantState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("plant step must be positive, got {dt}")));
    }
    let k1 = plant_derivative(s, cmd, act, params);
    let k2 = plant_derivative(&s.add_scaled(&k1, dt / 2.0), cmd, act, params);
    let k3 = plant_derivative(&s.add_scaled(&k2, dt / 2.0), cmd, act, params);
    let k4 = plant_derivative(&s.add_scaled(&k3, dt), cmd, act, params);
    let mut out = *s;
    for (k, w) in [(k1, 1.0), (k2, 2.0), (k3, 2.0), (k4, 1.0)] {
        out = out.add_scaled(&k, w * dt / 6.0);
    }
    out.attitude.yaw = wrap_angle(out.attitude.yaw);
    out.time = s.time + dt;
    Ok(out)
}

fn normal3(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    let mut n = || -> f64 { StandardNormal.sample(rng) };
    Vec3::new(n(), n(), n())
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindModel {
    /// N, world frame.
    pub mean_force: Vec3<f64>,
    /// Stationary standard deviation of the gust per axis, N.
    pub gust_sigma: f64,
    /// s
    pub gust_corr_time: f64,
    pub seed: u64,
}

impl Default for WindModel {
    fn default() -> Self {
        Self {
            mean_force: Vec3::new(2.5, 0.0, 0.0),
            gust_sigma: 0.4,
            gust_corr_time: 2.0,
            seed: 0,
        }
    }
}

impl WindModel {
    pub fn calm() -> Self {
        Self {
            mean_force: Vec3::zeros(),
            gust_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_force.is_finite() && self.gust_sigma >= 0.0 && self.gust_sigma.is_finite()) {
            return Err(Error::Config(
                "wind mean must be finite and gust_sigma non-negative".into(),
            ));
        }
        if !(self.gust_corr_time > 0.0 && self.gust_corr_time.is_finite()) {
            return Err(Error::Config("wind gust_corr_time must be positive".into()));
        }
        Ok(())
    }
}

/// Ornstein-Uhlenbeck gust process around the mean force.
#[derive(Clone, Debug)]
pub struct Wind {
    pub model: WindModel,
    force: Vec3<f64>,
    rng: ChaCha8Rng,
}

impl Wind {
    pub fn new(model: WindModel) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            force: model.mean_force,
            rng: seeded(model.seed, 1),
            model,
        })
    }

    pub fn force(&self) -> Vec3<f64> {
        self.force
    }

    pub fn step(&mut self, dt: f64) -> Vec3<f64> {
        let m = &self.model;
        if m.gust_sigma > 0.0 {
            let a = dt / m.gust_corr_time;
            let eta = normal3(&mut self.rng);
            self.force = self.force + (m.mean_force - self.force) * a + eta * (m.gust_sigma * (2.0 * a).sqrt());
        }
        self.force
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdometryConfig {
    /// m
    pub position_sigma: f64,
    /// rad
    pub attitude_sigma: f64,
    /// m/s
    pub velocity_sigma: f64,
    /// Expected final offset as a fraction of distance travelled.
    pub drift_rate: f64,
    /// Hz
    pub rate: f64,
    pub seed: u64,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        Self {
            position_sigma: 0.0,
            attitude_sigma: 0.0,
            velocity_sigma: 0.0,
            drift_rate: 0.0082,
            rate: 30.0,
            seed: 0,
        }
    }
}

impl OdometryConfig {
    pub fn validate(&self) -> Result<()> {
        let sig = [self.position_sigma, self.attitude_sigma, self.velocity_sigma];
        if sig.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Config("odometry sigmas must be non-negative".into()));
        }
        if !(0.0..0.05).contains(&self.drift_rate) {
            return Err(Error::Config(format!(
                "odometry drift_rate {} outside [0, 0.05)",
                self.drift_rate
            )));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::Config("odometry rate must be positive".into()));
        }
        Ok(())
    }

    /// Random-walk standard deviation per square-root metre of horizontal travel.
    pub fn drift_sigma(&self) -> f64 {
        self.drift_rate * DRIFT_CALIBRATION_LENGTH.sqrt() / DRIFT_NORM_FACTOR
    }
}

/// Visual odometry: truth plus white noise plus a distance-driven position random walk.
#[derive(Clone, Debug)]
pub struct OdometryEmulator {
    pub config: OdometryConfig,
    drift: Vec3<f64>,
    last_p: Option<Vec3<f64>>,
    distance: f64,
    rng: ChaCha8Rng,
}

impl OdometryEmulator {
    pub fn new(config: OdometryConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            drift: Vec3::zeros(),
            last_p: None,
            distance: 0.0,
            rng: seeded(config.seed, 2),
            config,
        })
    }

    pub fn drift(&self) -> Vec3<f64> {
        self.drift
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Advances the drift by the distance moved since the previous call.
    pub fn advance(&mut self, p: Vec3<f64>) {
        let ds = self.last_p.map_or(0.0, |q| (p - q).norm());
        self.last_p = Some(p);
        self.distance += ds;
        let sigma = self.config.drift_sigma();
        if sigma > 0.0 && ds > 0.0 {
            let n = normal3(&mut self.rng);
            let s = sigma * ds.sqrt();
            self.drift += Vec3::new(n.x * s, n.y * s, n.z * s * 0.5);
        }
    }

    pub fn sample(&mut self, truth: &PlantState) -> OdometryMeasurement {
        self.advance(truth.p);
        let c = &self.config;
        let np = normal3(&mut self.rng);
        let na = normal3(&mut self.rng);
        let nv = normal3(&mut self.rng);
        let a = truth.attitude;
        OdometryMeasurement {
            p: truth.p + self.drift + np * c.position_sigma,
            attitude: EulerAngles::new(
                a.roll + na.x * c.attitude_sigma,
                a.pitch + na.y * c.attitude_sigma,
                wrap_angle(a.yaw + na.z * c.attitude_sigma),
            ),
            v: truth.v + nv * c.velocity_sigma,
            stamp: truth.time,
            position_var: c.position_sigma.powi(2).max(1e-6),
            attitude_var: c.attitude_sigma.powi(2).max(1e-6),
            velocity_var: c.velocity_sigma.powi(2).max(1e-6),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImuConfig {
    /// m/s^2
    pub accel_sigma: f64,
    /// rad/s
    pub gyro_sigma: f64,
    /// Constant accelerometer bias, body frame, m/s^2.
    pub accel_bias: Vec3<f64>,
    /// Hz
    pub rate: f64,
    pub seed: u64,
}

impl Default for ImuConfig {
    fn default() -> Self {
        Self {
            accel_sigma: 0.0,
            gyro_sigma: 0.0,
            accel_bias: Vec3::zeros(),
            rate: 50.0,
            seed: 0,
        }
    }
}

impl ImuConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.accel_sigma >= 0.0 && self.gyro_sigma >= 0.0 && self.accel_bias.is_finite()) {
            return Err(Error::Config("IMU sigmas must be non-negative".into()));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::Config("IMU rate must be positive".into()));
        }
        Ok(())
    }
}

/// Noise-free specific force (body frame) and body rates implied by the plant derivative.
pub fn ideal_imu(truth: &PlantState, d: &Derivative, gravity: f64) -> (Vec3<f64>, Vec3<f64>) {
    let r = rotation_from_euler(&truth.attitude);
    let accel = r.transpose().mul_vec(d.v + Vec3::unit_z() * gravity);
    let rates = body_rates_from_euler_rates(&truth.attitude, d.attitude.to_vec3());
    (accel, rates)
}

#[derive(Clone, Debug)]
pub struct ImuEmulator {
    pub config: ImuConfig,
    rng: ChaCha8Rng,
}

impl ImuEmulator {
    pub fn new(config: ImuConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            rng: seeded(config.seed, 3),
            config,
        })
    }

    pub fn sample(&mut self, truth: &PlantState, d: &Derivative, gravity: f64) -> ImuSample {
        let (accel, gyro) = ideal_imu(truth, d, gravity);
        let na = normal3(&mut self.rng);
        let ng = normal3(&mut self.rng);
        ImuSample {
            stamp: truth.time,
            gyro: gyro + ng * self.config.gyro_sigma,
            accel: accel + self.config.accel_bias + na * self.config.accel_sigma,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hover() -> PlantState {
        PlantState::at_rest(Vec3::new(0.0, 0.0, 1.0), 0.0)
    }

    #[test]
    fn hover_persists_in_both_modes() {
        let params = VehicleParams::default();
        for mode in [VerticalMode::Thrust, VerticalMode::Velocity] {
            let act = ActuatorModel {
                vertical_mode: mode,
                ..Default::default()
            };
            let mut s = hover();
            for _ in 0..500 {
                s = plant_step(&s, &ActuatorCommand::default(), &act, &params, 0.002).unwrap();
            }
            assert!((s.p - Vec3::new(0.0, 0.0, 1.0)).norm() <= 1e-6);
            assert!((s.time - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn roll_step_steady_state() {
        let params = VehicleParams::default();
        let act = ActuatorModel::default();
        let mut s = hover();
        let cmd = ActuatorCommand::new(200.0, 0.0, 0.0, 0.0);
        for _ in 0..5000 {
            s = plant_step(&s, &cmd, &act, &params, 0.002).unwrap();
        }
        let expected = 26.37 / 27.04 * 8.65e-4 * 200.0;
        assert!((s.attitude.roll - expected).abs() < 1e-6, "{}", s.attitude.roll);
        assert!((expected - 0.16874).abs() < 1e-4);
    }

    #[test]
    fn dead_zone_swallows_command() {
        let params = VehicleParams::default();
        let act = ActuatorModel {
            dead_zones: [DeadZone::symmetric(51.0); 4],
            ..Default::default()
        };
        let mut s = hover();
        let cmd = ActuatorCommand::new(50.0, -50.0, 50.0, 30.0);
        for _ in 0..500 {
            s = plant_step(&s, &cmd, &act, &params, 0.002).unwrap();
        }
        assert_eq!(s.attitude, hover().attitude);
        assert_eq!(s.attitude_rates, [0.0, 0.0]);
    }

    #[test]
    fn velocity_mode_tracks_first_order() {
        let params = VehicleParams::default();
        let act = ActuatorModel {
            vertical_mode: VerticalMode::Velocity,
            ..Default::default()
        };
        let mut s = hover();
        let cmd = ActuatorCommand::new(0.0, 0.0, 0.0, 100.0);
        for _ in 0..500 {
            s = plant_step(&s, &cmd, &act, &params, 0.002).unwrap();
        }
        let expected = act.vertical.step_response(1.0) * act.scales.lambda_vz * 100.0;
        assert!((s.v.z - expected).abs() < 1e-9);
    }

    #[test]
    fn command_adapter_inverts_pipeline() {
        let params = VehicleParams::default();
        let act = ActuatorModel {
            dead_zones: [DeadZone::symmetric(20.0); 4],
            trims: TrimOffset::from_array([10.0, -5.0, 3.0, 7.0]),
            ..Default::default()
        };
        let u = ControlInput::new(0.1, -0.05, params.hover_thrust() + 3.0, 0.2);
        let c = act.effective_counts(&act.command_from_input(&u, &params));
        assert!((c[0] * act.scales.lambda_phi - 0.1).abs() < 1e-12);
        assert!((c[1] * act.scales.lambda_theta + 0.05).abs() < 1e-12);
        assert!((c[2] * act.scales.lambda_psi_dot * act.yaw_rate.k - 0.2).abs() < 1e-12);
        assert!((c[3] * thrust_scale(&params) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn calm_wind_is_constant() {
        let mut w = Wind::new(WindModel {
            gust_sigma: 0.0,
            ..Default::default()
        })
        .unwrap();
        for _ in 0..100 {
            assert_eq!(w.step(0.002), Vec3::new(2.5, 0.0, 0.0));
        }
    }

    #[test]
    fn exact_odometry_without_noise() {
        let mut e = OdometryEmulator::new(OdometryConfig {
            drift_rate: 0.0,
            ..Default::default()
        })
        .unwrap();
        let mut s = hover();
        for i in 0..50 {
            s.p.x = i as f64 * 0.1;
            let z = e.sample(&s);
            assert_eq!(z.p, s.p);
            assert_eq!(z.attitude, s.attitude);
        }
    }

    #[test]
    fn hover_imu_reads_gravity() {
        let params = VehicleParams::default();
        let s = hover();
        let d = plant_derivative(&s, &ActuatorCommand::default(), &ActuatorModel::default(), &params);
        let (a, w) = ideal_imu(&s, &d, params.gravity);
        assert!((a - Vec3::new(0.0, 0.0, params.gravity)).norm() < 1e-12);
        assert_eq!(w, Vec3::zeros());
    }
}
