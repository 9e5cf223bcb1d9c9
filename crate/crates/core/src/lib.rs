//! Simulation, identification, estimation and NMPC for a small quadrotor flown
//! through an attitude autopilot.
//!
//! The math core (frames, dynamics, trajectories, transfer-function models) is
//! generic over [`scalar::Real`]; the estimators, the optimizer and the harness
//! work in `f64`. The aliases below name the common concrete types.

pub mod dynamics;
pub mod error;
pub mod frames;
pub mod fusion;
pub mod harness;
pub mod kalman;
pub mod nmpc;
pub mod observer;
pub mod scalar;
pub mod simulator;
pub mod sysid;
pub mod timesync;
pub mod trajectory;

pub use error::{Error, Result};

pub type Vec3d = frames::Vec3<f64>;
pub type Vec3f = frames::Vec3<f32>;
pub type EulerAnglesd = frames::EulerAngles<f64>;
pub type EulerAnglesf = frames::EulerAngles<f32>;
pub type RotationMatrixd = frames::RotationMatrix<f64>;
pub type RotationMatrixf = frames::RotationMatrix<f32>;
pub type FrameTransformd = frames::FrameTransform<f64>;
pub type StateVectord = dynamics::StateVector<f64>;
pub type StateVectorf = dynamics::StateVector<f32>;
pub type ControlInputd = dynamics::ControlInput<f64>;
pub type ControlInputf = dynamics::ControlInput<f32>;
pub type VehicleParamsd = dynamics::VehicleParams<f64>;
pub type VehicleParamsf = dynamics::VehicleParams<f32>;
pub type FirstOrderModeld = sysid::FirstOrderModel<f64>;
pub type SecondOrderModeld = sysid::SecondOrderModel<f64>;
pub type ReferenceTrajectoryd = trajectory::ReferenceTrajectory<f64>;
pub type ReferenceSampled = trajectory::ReferenceSample<f64>;
