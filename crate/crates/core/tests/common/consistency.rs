use mav_core::dynamics::{ControlInput, StateVector, VehicleParams};
use mav_core::frames::{EulerAngles, Vec3};
use mav_core::fusion::*;
use mav_core::kalman::{is_valid_covariance, nees};
use mav_core::observer::*;
use mav_core::scalar::wrap_angle;
use mav_core::timesync::ImuSample;
use nalgebra::SVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sided band for the run-averaged NEES of a `dim`-state filter over `runs` runs.
pub fn nees_band(dim: usize, runs: usize, confidence: f64) -> (f64, f64) {
    let chi = ChiSquared::new((dim * runs) as f64).unwrap();
    let tail = (1.0 - confidence) / 2.0;
    (
        chi.inverse_cdf(tail) / runs as f64,
        chi.inverse_cdf(1.0 - tail) / runs as f64,
    )
}

pub fn fraction_inside(values: &[f64], band: (f64, f64)) -> f64 {
    values.iter().filter(|v| **v >= band.0 && **v <= band.1).count() as f64 / values.len() as f64
}

fn gaussian<const N: usize>(rng: &mut ChaCha8Rng, var: &SVector<f64, N>) -> SVector<f64, N> {
    SVector::from_fn(|i, _| {
        let n: f64 = StandardNormal.sample(rng);
        n * var[i].sqrt()
    })
}

fn excitation(t: f64, params: &VehicleParams<f64>) -> ControlInput<f64> {
    ControlInput::new(
        0.1 * t.sin(),
        0.05 * (0.7 * t).cos(),
        params.hover_thrust() + 2.0 * (0.5 * t).sin(),
        0.0,
    )
}

/// Run-averaged observer NEES per epoch. Truth is drawn from the filter's own model.
pub fn observer_nees(runs: usize, steps: usize, dt: f64, seed: u64) -> Vec<f64> {
    let model = ObserverModel::default();
    let noise = ObserverNoise::default();
    let q = noise.process().diagonal() * dt;
    let r = noise.measurement().diagonal();
    let mut sum = vec![0.0; steps];
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + run as u64);
        let mut est = ObserverState::from_state(&StateVector::at_rest(Vec3::new(0.0, 0.0, 2.0)), 0.1, 1.0);
        let mut truth = est;
        truth.mean += gaussian(&mut rng, &est.covariance.diagonal());
        let mut filter = Observer::new(est, model, noise).unwrap();
        for (k, slot) in sum.iter_mut().enumerate() {
            let u = excitation(k as f64 * dt, &model.params);
            truth = observer_predict(&truth, &u, 0.0, &model, &noise, dt).unwrap();
            truth.mean += gaussian(&mut rng, &q);
            filter.predict(&u, 0.0, dt).unwrap();
            assert!(is_valid_covariance(&filter.state.covariance));
            let z = truth.mean.fixed_rows::<OBS_MEAS_DIM>(0) + gaussian(&mut rng, &r);
            filter.update(&z);
            assert!(is_valid_covariance(&filter.state.covariance));
            est = filter.state;
            *slot += nees(&(truth.mean - est.mean), &est.covariance).unwrap() / runs as f64;
        }
    }
    sum
}

pub fn fusion_measurement_noise() -> (f64, f64, f64) {
    (1e-4, 1e-5, 1e-3)
}

/// Run-averaged fusion NEES per epoch. Truth is drawn from the filter's own model.
pub fn fusion_nees(runs: usize, steps: usize, dt: f64, seed: u64) -> Vec<f64> {
    let noise = FusionNoise::default();
    let g = 9.81;
    let (pv, av, vv) = fusion_measurement_noise();
    let q = {
        let mut d = FusionVector::zeros();
        for i in 0..3 {
            d[i] = noise.position_psd * dt;
            d[3 + i] = noise.accel_psd * dt;
            d[6 + i] = noise.gyro_psd * dt;
            d[9 + i] = noise.bias_psd * dt;
        }
        d
    };
    let mut sum = vec![0.0; steps];
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + run as u64);
        let est0 = FusedState::new(
            Vec3::new(0.0, 0.0, 2.0),
            Vec3::zeros(),
            EulerAngles::zeros(),
            0.1,
            0.05,
            0.0,
        );
        let mut truth = est0;
        truth.mean += gaussian(&mut rng, &est0.covariance.diagonal());
        let mut filter = Fusion::new(est0, noise, g).unwrap();
        for (k, slot) in sum.iter_mut().enumerate() {
            let t = (k + 1) as f64 * dt;
            let imu = ImuSample {
                stamp: t,
                gyro: Vec3::new(0.05 * t.sin(), 0.05 * t.cos(), 0.1),
                accel: Vec3::new(0.3 * t.sin(), 0.2 * t.cos(), g),
            };
            truth = fusion_propagate(&truth, &imu, g, &noise).unwrap();
            truth.mean += gaussian(&mut rng, &q);
            filter.propagate(&imu).unwrap();
            assert!(is_valid_covariance(&filter.state.covariance));
            let n = gaussian(
                &mut rng,
                &SVector::<f64, 9>::from_column_slice(&[pv, pv, pv, av, av, av, vv, vv, vv]),
            );
            let z = OdometryMeasurement {
                p: Vec3::new(truth.mean[0] + n[0], truth.mean[1] + n[1], truth.mean[2] + n[2]),
                attitude: EulerAngles::new(
                    truth.mean[6] + n[3],
                    truth.mean[7] + n[4],
                    wrap_angle(truth.mean[8] + n[5]),
                ),
                v: Vec3::new(truth.mean[3] + n[6], truth.mean[4] + n[7], truth.mean[5] + n[8]),
                stamp: t,
                position_var: pv,
                attitude_var: av,
                velocity_var: vv,
            };
            filter.update(&z).unwrap();
            assert!(is_valid_covariance(&filter.state.covariance));
            let mut err = truth.mean - filter.state.mean;
            err[8] = wrap_angle(err[8]);
            *slot += nees(&err, &filter.state.covariance).unwrap() / runs as f64;
        }
    }
    sum
}
