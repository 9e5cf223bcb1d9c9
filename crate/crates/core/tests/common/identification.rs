use mav_core::frames::{EulerAngles, Vec3};
use mav_core::sysid::{ActuatorCommand, FlightLog, FlightRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const DT: f64 = 0.01;

pub fn chirp(seconds: f64) -> Vec<f64> {
    let n = (seconds / DT) as usize;
    let (f0, f1) = (0.05, 5.0);
    (0..n)
        .map(|i| {
            let t = i as f64 * DT;
            let phase = 2.0 * std::f64::consts::PI * (f0 * t + 0.5 * (f1 - f0) / seconds * t * t);
            phase.sin()
        })
        .collect()
}

/// Generator oracle: RK4 with fine substeps on `x' = A x + B u`, input held per sample.
pub fn rk4_generate(a: [[f64; 2]; 2], b: [f64; 2], order: usize, u: &[f64]) -> Vec<f64> {
    let sub = 50;
    let h = DT / sub as f64;
    let f = |x: [f64; 2], u: f64| {
        if order == 1 {
            [a[0][0] * x[0] + b[0] * u, 0.0]
        } else {
            [
                a[0][0] * x[0] + a[0][1] * x[1] + b[0] * u,
                a[1][0] * x[0] + a[1][1] * x[1] + b[1] * u,
            ]
        }
    };
    let mut x = [0.0; 2];
    let mut y = Vec::with_capacity(u.len());
    for &ui in u {
        y.push(x[0]);
        for _ in 0..sub {
            let k1 = f(x, ui);
            let k2 = f([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]], ui);
            let k3 = f([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]], ui);
            let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]], ui);
            for j in 0..2 {
                x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
    }
    y
}

pub fn first_order_data(k: f64, tau: f64, u: &[f64]) -> Vec<f64> {
    rk4_generate([[-1.0 / tau, 0.0], [0.0, 0.0]], [k / tau, 0.0], 1, u)
}

pub fn second_order_data(k: f64, zeta: f64, omega: f64, u: &[f64]) -> Vec<f64> {
    let w2 = omega * omega;
    rk4_generate([[0.0, 1.0], [-w2, -2.0 * zeta * omega]], [0.0, k * w2], 2, u)
}

/// Adds white noise at 20 dB SNR (signal-to-noise power ratio 100).
pub fn add_noise(y: &[f64], seed: u64) -> Vec<f64> {
    let rms = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
    let n = Normal::new(0.0, rms / 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    y.iter().map(|v| v + n.sample(&mut rng)).collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

// (name, k, tau) for every channel's first-order row
pub const FIRST_ORDER_ROWS: [(&str, f64, f64); 4] = [
    ("roll", 1.673, 0.472),
    ("pitch", 1.575, 0.472),
    ("yaw_rate", 1.057, 0.161),
    ("vertical", 1.118, 0.334),
];

pub const SECOND_ORDER_ROWS: [(&str, f64, f64, f64); 4] = [
    ("roll", 26.37 / 27.04, 5.32 / (2.0 * 5.2), 5.2),
    (
        "pitch",
        28.86 / 27.45,
        6.00 / (2.0 * 5.239274758971894),
        5.239274758971894,
    ),
    ("yaw_rate", 1.079, 1.898, 23.448),
    ("vertical", 1.024, 0.718, 4.985),
];

pub fn scale_log(u: &[[f64; 4]], z: &[[f64; 4]]) -> FlightLog {
    // heading is integrated forward; the log recovers yaw rate by differentiating it
    let mut yaw = 0.0;
    let mut recs = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        recs.push(FlightRecord {
            t: i as f64 * DT,
            command: ActuatorCommand::from_array(u[i]),
            attitude: EulerAngles::new(z[i][0], z[i][1], yaw),
            p: Vec3::zeros(),
            v: Vec3::new(0.0, 0.0, z[i][3]),
        });
        if i + 1 < u.len() {
            yaw = mav_core::scalar::wrap_angle(yaw + z[i][2] * DT);
        }
    }
    FlightLog::new(recs).unwrap()
}

pub fn closed_form(u: &[f64], z: &[f64]) -> f64 {
    let num: f64 = u.iter().zip(z).map(|(u, z)| u * z).sum();
    let den: f64 = u.iter().map(|u| u * u).sum();
    num / den
}
