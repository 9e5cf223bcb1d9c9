//! Scenario configuration, read from TOML over a named noise preset.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleParams;
use crate::error::{Error, Result};
use crate::fusion::FusionNoise;
use crate::nmpc::{MpcWeights, OcpSpec, SolverOptions};
use crate::observer::ObserverNoise;
use crate::simulator::{ActuatorModel, ImuConfig, OdometryConfig, WindModel};
use crate::sysid::Channel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Hover,
    Step,
    Trajectory,
    Figure8,
    SysidSweep,
}

/// Sensor noise environment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoisePreset {
    /// Noise-free sensors, no drift.
    #[default]
    Ideal,
    /// Feature-rich indoor scene.
    Indoor,
    /// Sparse outdoor features: noisier odometry.
    Outdoor,
}

impl FromStr for NoisePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Self::Ideal),
            "indoor" => Ok(Self::Indoor),
            "outdoor" => Ok(Self::Outdoor),
            _ => Err(Error::Config(format!("unknown preset '{s}' (ideal, indoor, outdoor)"))),
        }
    }
}

impl NoisePreset {
    pub fn sensors(self) -> (OdometryConfig, ImuConfig) {
        let (odo, imu) = (OdometryConfig::default(), ImuConfig::default());
        match self {
            Self::Ideal => (OdometryConfig { drift_rate: 0.0, ..odo }, imu),
            Self::Indoor => (
                OdometryConfig {
                    position_sigma: 0.01,
                    attitude_sigma: 0.005,
                    velocity_sigma: 0.02,
                    drift_rate: 0.001,
                    ..odo
                },
                ImuConfig {
                    accel_sigma: 0.05,
                    gyro_sigma: 0.005,
                    ..imu
                },
            ),
            Self::Outdoor => (
                OdometryConfig {
                    position_sigma: 0.03,
                    attitude_sigma: 0.01,
                    velocity_sigma: 0.05,
                    ..odo
                },
                ImuConfig {
                    accel_sigma: 0.1,
                    gyro_sigma: 0.01,
                    ..imu
                },
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rates {
    pub plant: f64,
    pub control: f64,
    pub imu: f64,
    pub odometry: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            plant: 500.0,
            control: 50.0,
            imu: 50.0,
            odometry: 30.0,
        }
    }
}

/// Attitude model assumed by the controller.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttitudeModel {
    /// First-order fit matching the plant's DC gain, `tau = 2 zeta / omega`.
    #[default]
    Matched,
    /// First-order values from the identification table.
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub horizon_steps: usize,
    pub horizon_dt: f64,
    pub weights: MpcWeights,
    pub solver: SolverOptions,
    /// Yaw proportional gain, 1/s.
    pub k_psi: f64,
    pub yaw_rate_limit: f64,
    pub attitude_model: AttitudeModel,
    /// Feed the observer's force estimate to the controller.
    pub use_force_estimate: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 20,
            horizon_dt: 0.1,
            weights: MpcWeights::default(),
            solver: SolverOptions::default(),
            k_psi: 1.0,
            yaw_rate_limit: 1.0,
            attitude_model: AttitudeModel::Matched,
            use_force_estimate: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Figure8Config {
    /// Path length per lap, m.
    pub length: f64,
    pub height_amp: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub laps: usize,
    pub yaw_follow: bool,
}

impl Default for Figure8Config {
    fn default() -> Self {
        Self {
            length: 10.24,
            height_amp: 0.3,
            v_max: 1.63,
            a_max: 5.37,
            laps: 2,
            yaw_follow: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    /// Initial and hover position, m.
    pub start: [f64; 3],
    pub yaw: f64,
    /// Step displacement, m.
    pub step: [f64; 3],
    pub step_time: f64,
    /// `t,x,y,z,yaw` file for the trajectory scenario, relative to the config file.
    pub waypoints: Option<PathBuf>,
    pub figure8: Figure8Config,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            start: [0.0, 0.0, 2.0],
            yaw: 0.0,
            step: [1.0, 0.0, 0.0],
            step_time: 5.0,
            waypoints: None,
            figure8: Figure8Config::default(),
        }
    }
}

/// Open-loop chirp on one channel, for system identification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub channel: Channel,
    /// counts
    pub amplitude: f64,
    pub f0: f64,
    pub f1: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            channel: Channel::Roll,
            amplitude: 150.0,
            f0: 0.05,
            f1: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindConfig {
    pub enabled: bool,
    /// N, world frame.
    pub mean_force: [f64; 3],
    pub gust_sigma: f64,
    pub gust_corr_time: f64,
}

impl Default for WindConfig {
    fn default() -> Self {
        let m = WindModel::default();
        Self {
            enabled: false,
            mean_force: m.mean_force.to_array(),
            gust_sigma: m.gust_sigma,
            gust_corr_time: m.gust_corr_time,
        }
    }
}

impl WindConfig {
    /// Wind model for a run; calm when disabled.
    pub fn model(&self, seed: u64) -> WindModel {
        if !self.enabled {
            return WindModel {
                seed,
                ..WindModel::calm()
            };
        }
        WindModel {
            mean_force: crate::frames::Vec3::from_array(self.mean_force),
            gust_sigma: self.gust_sigma,
            gust_corr_time: self.gust_corr_time,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimesyncConfig {
    pub capacity: usize,
    /// Image transport delay, s.
    pub camera_latency: f64,
    /// Camera-to-IMU clock offset added to sync stamps, s.
    pub camera_offset: f64,
}

impl Default for TimesyncConfig {
    fn default() -> Self {
        Self {
            capacity: crate::timesync::DEFAULT_CAPACITY,
            camera_latency: 0.03,
            camera_offset: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    /// s
    pub duration: f64,
    /// Drives every random source of the run.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub preset: NoisePreset,
    /// Metric window `[a, b]` in seconds; the whole run when absent.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub vehicle: VehicleParams<f64>,
    #[serde(default)]
    pub actuators: ActuatorModel,
    #[serde(default)]
    pub wind: WindConfig,
    #[serde(default)]
    pub odometry: OdometryConfig,
    #[serde(default)]
    pub imu: ImuConfig,
    #[serde(default)]
    pub observer: ObserverNoise,
    #[serde(default)]
    pub fusion: FusionNoise,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub rates: Rates,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub timesync: TimesyncConfig,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioKind, duration: f64, preset: NoisePreset) -> Self {
        let (odometry, imu) = preset.sensors();
        Self {
            scenario,
            duration,
            seed: 0,
            preset,
            window: None,
            output: None,
            vehicle: VehicleParams::default(),
            actuators: ActuatorModel::default(),
            wind: WindConfig::default(),
            odometry,
            imu,
            observer: ObserverNoise::default(),
            fusion: FusionNoise::default(),
            controller: ControllerConfig::default(),
            reference: ReferenceConfig::default(),
            rates: Rates::default(),
            sweep: SweepConfig::default(),
            timesync: TimesyncConfig::default(),
        }
    }

    /// Parses TOML. Sensor sections are layered over the selected preset, so a file
    /// only needs the keys it changes. Relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        Self::from_table(user, base_dir)
    }

    pub fn from_table(user: toml::Table, base_dir: Option<&Path>) -> Result<Self> {
        let preset = match user.get("preset") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::Config("preset must be a string".into())),
            None => NoisePreset::default(),
        };
        let (odo, imu) = preset.sensors();
        let mut merged = toml::Table::new();
        merged.insert("odometry".into(), to_value(&odo)?);
        merged.insert("imu".into(), to_value(&imu)?);
        merge(&mut merged, user);
        let mut cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        if let (Some(dir), Some(w)) = (base_dir, cfg.reference.waypoints.as_mut()) {
            if w.is_relative() {
                *w = dir.join(&*w);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        let r = &self.rates;
        for (name, v) in [
            ("plant", r.plant),
            ("control", r.control),
            ("imu", r.imu),
            ("odometry", r.odometry),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} rate must be positive")));
            }
        }
        let ratio = r.plant / r.control;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(Error::Config(
                "plant rate must be an integer multiple of the control rate".into(),
            ));
        }
        if (r.imu - r.control).abs() > 1e-9 {
            return Err(Error::Config("IMU rate must equal the control rate".into()));
        }
        if r.odometry > r.plant {
            return Err(Error::Config("odometry rate cannot exceed the plant rate".into()));
        }
        if let Some([a, b]) = self.window {
            if !(a >= 0.0 && b > a) {
                return Err(Error::Config(format!("window [{a}, {b}] must satisfy 0 <= a < b")));
            }
        }
        self.vehicle.validate().map_err(config)?;
        self.actuators.validate().map_err(config)?;
        WindConfig {
            enabled: true,
            ..self.wind
        }
        .model(0)
        .validate()?;
        self.odometry.validate()?;
        self.imu.validate()?;
        self.observer.validate()?;
        self.fusion.validate()?;
        self.ocp().validate().map_err(config)?;
        if self.timesync.capacity == 0 || !(self.timesync.camera_latency >= 0.0) {
            return Err(Error::Config(
                "timesync capacity must be positive and latency non-negative".into(),
            ));
        }
        if !(self.sweep.amplitude > 0.0 && self.sweep.f0 > 0.0 && self.sweep.f1 > self.sweep.f0) {
            return Err(Error::Config("sweep needs amplitude > 0 and 0 < f0 < f1".into()));
        }
        if self.scenario == ScenarioKind::Trajectory {
            match &self.reference.waypoints {
                None => return Err(Error::Config("trajectory scenario needs reference.waypoints".into())),
                Some(p) if !p.exists() => {
                    return Err(Error::Config(format!("waypoint file {} does not exist", p.display())))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Vehicle parameters as seen by the controller.
    pub fn controller_params(&self) -> VehicleParams<f64> {
        let mut p = self.vehicle;
        if self.controller.attitude_model == AttitudeModel::Matched {
            let (r, q) = (&self.actuators.roll, &self.actuators.pitch);
            p.gain_roll = r.k;
            p.tau_roll = 2.0 * r.zeta / r.omega;
            p.gain_pitch = q.k;
            p.tau_pitch = 2.0 * q.zeta / q.omega;
        }
        p
    }

    pub fn ocp(&self) -> OcpSpec {
        let mut ocp = OcpSpec::new(self.controller_params());
        ocp.n_steps = self.controller.horizon_steps;
        ocp.dt = self.controller.horizon_dt;
        ocp.weights = self.controller.weights;
        ocp.solver = self.controller.solver;
        ocp
    }

    /// Default metric window for the scenario.
    pub fn metric_window(&self) -> (f64, f64) {
        match self.window {
            Some([a, b]) => (a, b.min(self.duration)),
            None => (0.0, self.duration),
        }
    }
}

fn config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<toml::Value> {
    toml::Value::try_from(v).map_err(|e| Error::Config(e.to_string()))
}

/// Deep merge: tables merge key by key, anything else is replaced.
pub fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
