//! Closed-loop scenario execution.

use std::collections::VecDeque;

use crate::dynamics::{ControlInput, StateVector};
use crate::error::{Error, Result};
use crate::frames::{EulerAngles, Vec3};
use crate::fusion::{FusedState, Fusion, OdometryMeasurement};
use crate::nmpc::MpcController;
use crate::observer::{observer_measurement, Observer, ObserverModel, ObserverState};
use crate::simulator::{plant_derivative, plant_step, ImuEmulator, OdometryEmulator, PlantState, Wind};
use crate::sysid::{ActuatorCommand, Channel};
use crate::timesync::{AccelSample, GyroSample, ImageMatcher, ImageMessage, ImuMerger, ImuSample, SyncMessage};
use crate::trajectory::{load_waypoints, sample_reference, Figure8, Piecewise, ReferenceSample, ReferenceTrajectory};

use super::config::{ScenarioConfig, ScenarioKind};
use super::runlog::{tail_dump, RunLog, RunRecord};

const DUMP_RECORDS: usize = 50;

/// Counters collected during a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunStats {
    pub odometry_updates: u64,
    pub observer_gated: u64,
    pub dropped_images: u64,
    pub dropped_syncs: u64,
    pub dropped_imu: u64,
    pub nmpc_iterations: u64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub log: RunLog,
    pub stats: RunStats,
    pub reference_length: f64,
}

pub fn build_reference(cfg: &ScenarioConfig) -> Result<ReferenceTrajectory<f64>> {
    let r = &cfg.reference;
    let start = Vec3::from_array(r.start);
    Ok(match cfg.scenario {
        ScenarioKind::Hover | ScenarioKind::SysidSweep => ReferenceTrajectory::Hover { p: start, yaw: r.yaw },
        ScenarioKind::Step => ReferenceTrajectory::Step {
            from: start,
            to: start + Vec3::from_array(r.step),
            t_step: r.step_time,
            yaw: r.yaw,
        },
        ScenarioKind::Trajectory => {
            let path = r
                .waypoints
                .as_ref()
                .ok_or_else(|| Error::Config("trajectory scenario needs reference.waypoints".into()))?;
            let wps = load_waypoints(path)?;
            ReferenceTrajectory::Piecewise(Piecewise::from_waypoints(&wps).map_err(|e| Error::Config(e.to_string()))?)
        }
        ScenarioKind::Figure8 => {
            let f = &r.figure8;
            let fig = Figure8::fit_to_limits(f.length, f.height_amp, f.v_max, f.a_max, f.yaw_follow)
                .map_err(|e| Error::Config(e.to_string()))?
                .with_center(start)
                .with_laps(f.laps)
                .with_fixed_yaw(r.yaw);
            ReferenceTrajectory::Figure8(fig)
        }
    })
}

fn sweep_command(cfg: &ScenarioConfig, t: f64) -> ActuatorCommand {
    let s = &cfg.sweep;
    let phase = 2.0 * std::f64::consts::PI * (s.f0 * t + 0.5 * (s.f1 - s.f0) / cfg.duration * t * t);
    let mut cmd = ActuatorCommand::from_array(cfg.actuators.trims.to_array());
    cmd.set(s.channel, cmd.get(s.channel) + s.amplitude * phase.sin());
    cmd.saturated()
}

fn state_of(f: &FusedState) -> StateVector<f64> {
    StateVector::new(f.position(), f.velocity(), f.attitude())
}

struct World<'a> {
    cfg: &'a ScenarioConfig,
    traj: ReferenceTrajectory<f64>,
    plant: PlantState,
    wind: Wind,
    odometry: OdometryEmulator,
    imu: ImuEmulator,
    merger: ImuMerger,
    matcher: ImageMatcher<OdometryMeasurement>,
    in_flight: VecDeque<ImageMessage<OdometryMeasurement>>,
    matched: Vec<OdometryMeasurement>,
    fusion: Fusion,
    observer: Observer,
    controller: Option<MpcController>,
    last_imu: Option<ImuSample>,
    applied: Option<ControlInput<f64>>,
    seq: u64,
    odo_count: u64,
    records: Vec<RunRecord>,
    stats: RunStats,
}

impl<'a> World<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let traj = build_reference(cfg)?;
        let r0 = sample_reference(&traj, 0.0)?;
        let plant = PlantState::at_rest(r0.p, r0.yaw);
        let seed = cfg.seed;
        let wind = Wind::new(cfg.wind.model(seed))?;
        let odometry = OdometryEmulator::new(crate::simulator::OdometryConfig {
            seed,
            rate: cfg.rates.odometry,
            ..cfg.odometry
        })?;
        let imu = ImuEmulator::new(crate::simulator::ImuConfig {
            seed,
            rate: cfg.rates.imu,
            ..cfg.imu
        })?;
        let fusion = Fusion::new(
            FusedState::new(plant.p, plant.v, plant.attitude, 0.01, 0.01, 0.0),
            cfg.fusion,
            cfg.vehicle.gravity,
        )?;
        let model = ObserverModel {
            params: cfg.vehicle,
            roll: cfg.actuators.roll,
            pitch: cfg.actuators.pitch,
        };
        let x0 = StateVector::new(plant.p, plant.v, plant.attitude);
        let observer = Observer::new(ObserverState::from_state(&x0, 0.05, 1.0), model, cfg.observer)?;
        let controller = if cfg.scenario == ScenarioKind::SysidSweep {
            None
        } else {
            Some(
                MpcController::new(cfg.ocp(), cfg.controller.k_psi, cfg.controller.yaw_rate_limit)
                    .map_err(|e| Error::Config(e.to_string()))?,
            )
        };
        Ok(Self {
            cfg,
            traj,
            plant,
            wind,
            odometry,
            imu,
            merger: ImuMerger::new(),
            matcher: ImageMatcher::with_offset(cfg.timesync.capacity, cfg.timesync.camera_offset)?,
            in_flight: VecDeque::new(),
            matched: Vec::new(),
            fusion,
            observer,
            controller,
            last_imu: None,
            applied: None,
            seq: 0,
            odo_count: 0,
            records: Vec::new(),
            stats: RunStats::default(),
        })
    }

    fn abort(&self, time: f64, reason: impl Into<String>) -> Error {
        Error::Numerical {
            time,
            reason: reason.into(),
            dump: tail_dump(&self.records, DUMP_RECORDS),
        }
    }

    /// Camera capture: the sync pulse goes out now, the image after the transport delay.
    fn capture(&mut self) -> Result<()> {
        let z = self.odometry.sample(&self.plant);
        self.seq += 1;
        let sync = SyncMessage {
            seq: self.seq,
            stamp: z.stamp - self.cfg.timesync.camera_offset,
        };
        if let Some(img) = self.matcher.on_sync(sync)? {
            self.matched.push(OdometryMeasurement {
                stamp: img.stamp,
                ..img.payload
            });
        }
        self.in_flight.push_back(ImageMessage {
            seq: self.seq,
            payload: z,
            arrival_stamp: z.stamp + self.cfg.timesync.camera_latency,
        });
        Ok(())
    }

    fn deliver_images(&mut self, now: f64) -> Result<()> {
        while self.in_flight.front().is_some_and(|m| m.arrival_stamp <= now + 1e-12) {
            let msg = self.in_flight.pop_front().expect("checked non-empty");
            if let Some(img) = self.matcher.on_image(msg)? {
                self.matched.push(OdometryMeasurement {
                    stamp: img.stamp,
                    ..img.payload
                });
            }
        }
        Ok(())
    }

    fn sense_imu(&mut self, cmd: &ActuatorCommand) -> Result<()> {
        let d = plant_derivative(&self.plant, cmd, &self.cfg.actuators, &self.cfg.vehicle);
        let s = self.imu.sample(&self.plant, &d, self.cfg.vehicle.gravity);
        let mut out = self.merger.push_gyro(GyroSample {
            stamp: s.stamp,
            w: s.gyro,
        })?;
        out.extend(self.merger.push_accel(AccelSample {
            stamp: s.stamp,
            a: s.accel,
        })?);
        for sample in out {
            // each interval integrates the reading taken at its start
            if let Some(prev) = self.last_imu {
                self.fusion.propagate(&ImuSample {
                    stamp: sample.stamp,
                    ..prev
                })?;
            }
            self.last_imu = Some(sample);
        }
        Ok(())
    }

    fn applied_input(&self, cmd: &ActuatorCommand, est: &StateVector<f64>) -> ControlInput<f64> {
        let act = &self.cfg.actuators;
        let c = act.effective_counts(cmd);
        let s = PlantState {
            p: est.p,
            v: est.v,
            attitude: est.attitude,
            wind_force: self.observer.force(),
            ..Default::default()
        };
        ControlInput::new(
            act.scales.lambda_phi * c[0],
            act.scales.lambda_theta * c[1],
            plant_derivative(&s, cmd, act, &self.cfg.vehicle).thrust,
            act.scales.lambda_psi_dot * act.yaw_rate.k * c[2],
        )
    }

    fn tick(&mut self, t: f64, cmd_prev: &ActuatorCommand) -> Result<(ActuatorCommand, RunRecord)> {
        let dt_c = 1.0 / self.cfg.rates.control;
        self.sense_imu(cmd_prev)?;
        self.deliver_images(t)?;
        for z in std::mem::take(&mut self.matched) {
            self.fusion.update(&z)?;
            self.stats.odometry_updates += 1;
        }
        let est = state_of(&self.fusion.state);
        if let Some(u) = self.applied {
            self.observer.predict(&u, est.attitude.yaw, dt_c)?;
        }
        self.observer.update(&observer_measurement(&est));
        let f_est = self.observer.force();

        let reference: ReferenceSample<f64> = sample_reference(&self.traj, t)?;
        let (cmd, u, ref_att) = match self.controller.as_mut() {
            Some(ctrl) => {
                let f_ext = if self.cfg.controller.use_force_estimate {
                    f_est
                } else {
                    Vec3::zeros()
                };
                let u = ctrl
                    .receding_horizon_step(&est, &self.traj, t, f_ext)
                    .map_err(|e| Error::Numerical {
                        time: t,
                        reason: format!("controller failed: {e}"),
                        dump: String::new(),
                    })?;
                self.stats.nmpc_iterations += ctrl.last_plan().map_or(0, |p| p.iterations as u64);
                let p = &ctrl.ocp.params;
                let att = EulerAngles::new(p.gain_roll * u.roll, p.gain_pitch * u.pitch, reference.yaw);
                (self.cfg.actuators.command_from_input(&u, &self.cfg.vehicle), u, att)
            }
            None => {
                let cmd = sweep_command(self.cfg, t);
                (
                    cmd,
                    self.applied_input(&cmd, &est),
                    EulerAngles::new(0.0, 0.0, reference.yaw),
                )
            }
        };
        self.applied = Some(self.applied_input(&cmd, &est));

        let s = &self.plant;
        let w = self.plant.wind_force;
        let record = RunRecord {
            t,
            px: s.p.x,
            py: s.p.y,
            pz: s.p.z,
            vx: s.v.x,
            vy: s.v.y,
            vz: s.v.z,
            roll: s.attitude.roll,
            pitch: s.attitude.pitch,
            yaw: s.attitude.yaw,
            est_px: est.p.x,
            est_py: est.p.y,
            est_pz: est.p.z,
            est_vx: est.v.x,
            est_vy: est.v.y,
            est_vz: est.v.z,
            est_roll: est.attitude.roll,
            est_pitch: est.attitude.pitch,
            est_yaw: est.attitude.yaw,
            ref_px: reference.p.x,
            ref_py: reference.p.y,
            ref_pz: reference.p.z,
            ref_roll: ref_att.roll,
            ref_pitch: ref_att.pitch,
            ref_yaw: ref_att.yaw,
            u_roll: u.roll,
            u_pitch: u.pitch,
            u_thrust: u.thrust,
            u_yaw_rate: u.yaw_rate,
            c_phi: cmd.get(Channel::Roll),
            c_theta: cmd.get(Channel::Pitch),
            c_psidot: cmd.get(Channel::YawRate),
            c_vz: cmd.get(Channel::Vertical),
            fx_est: f_est.x,
            fy_est: f_est.y,
            fz_est: f_est.z,
            wind_x: w.x,
            wind_y: w.y,
            wind_z: w.z,
        };
        Ok((cmd, record))
    }

    fn advance_plant(&mut self, cmd: &ActuatorCommand, t_end: f64) -> Result<()> {
        let cfg = self.cfg;
        let substeps = (cfg.rates.plant / cfg.rates.control).round() as usize;
        let dt_p = 1.0 / cfg.rates.plant;
        let odo_period = 1.0 / cfg.rates.odometry;
        for _ in 0..substeps {
            self.plant.wind_force = self.wind.step(dt_p);
            self.plant = plant_step(&self.plant, cmd, &cfg.actuators, &cfg.vehicle, dt_p)?;
            let next_odo = (self.odo_count + 1) as f64 * odo_period;
            if self.plant.time + 1e-9 >= next_odo {
                self.odo_count += 1;
                self.capture()?;
            }
        }
        self.plant.time = t_end;
        Ok(())
    }
}

/// Runs a scenario to completion. Aborts with a dump of the last records on any
/// non-finite state.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let mut world = World::new(cfg)?;
    let dt_c = 1.0 / cfg.rates.control;
    let ticks = (cfg.duration * cfg.rates.control).round() as usize;
    let mut cmd = ActuatorCommand::from_array(cfg.actuators.trims.to_array());
    for k in 0..=ticks {
        let t = k as f64 * dt_c;
        let (next, record) = match world.tick(t, &cmd) {
            Ok(v) => v,
            Err(Error::Numerical { reason, .. }) => return Err(world.abort(t, reason)),
            Err(e) if !world.plant.is_finite() => return Err(world.abort(t, e.to_string())),
            Err(e) => return Err(e),
        };
        let finite = record.is_finite()
            && world.fusion.state.mean.iter().all(|v| v.is_finite())
            && world.observer.state.mean.iter().all(|v| v.is_finite());
        world.records.push(record);
        if !finite {
            return Err(world.abort(t, "non-finite state"));
        }
        cmd = next;
        if k < ticks {
            world.advance_plant(&cmd, (k + 1) as f64 * dt_c)?;
            if !world.plant.is_finite() {
                return Err(world.abort(t, "plant state diverged"));
            }
        }
    }
    world.stats.observer_gated = world.observer.gated();
    world.stats.dropped_images = world.matcher.dropped_images();
    world.stats.dropped_syncs = world.matcher.dropped_syncs();
    world.stats.dropped_imu = world.merger.dropped();
    Ok(RunOutput {
        reference_length: world.traj.length(),
        log: RunLog { records: world.records },
        stats: world.stats,
    })
}
